//! Thin command-line front end over the library: `generate` a dataset,
//! `sample` a posterior, `evaluate` a stored trace against held-out data,
//! and `report` a metrics file as JSON. Everything here delegates to
//! `nmc::harness`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nmc::engine::Method;
use nmc::harness::{self, io, AnnotationEval, ExperimentConfig};
use nmc::models::{generate_and_split, Hyperparams, ModelName, ModelSpec, Sizes};

#[derive(Parser)]
#[command(name = "nmc", version, about = "Single-site MCMC with curvature-matched proposals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward-simulate a model and write train/held-out dataset files.
    Generate(GenerateArgs),
    /// Run a sampler on a dataset (or on data generated from a config
    /// file) and write trace, metrics and summary files.
    Sample(SampleArgs),
    /// Recompute predictive metrics for a stored trace against held-out
    /// data.
    Evaluate(EvaluateArgs),
    /// Distill a metrics CSV into a summary JSON.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Funnel,
    Blr,
    Robust,
    Annotation,
}

impl From<ModelArg> for ModelName {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Funnel => ModelName::Funnel,
            ModelArg::Blr => ModelName::Blr,
            ModelArg::Robust => ModelName::Robust,
            ModelArg::Annotation => ModelName::Annotation,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Nmc,
    Rwm,
    Mala,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Nmc => Method::Nmc,
            MethodArg::Rwm => Method::Rwm,
            MethodArg::Mala => Method::Mala,
        }
    }
}

#[derive(Args)]
struct ModelFlags {
    /// Model to build.
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Rows (regressions) or items (annotation).
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Covariate dimension or labeler count.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Classes (annotation only).
    #[arg(long, default_value_t = 3)]
    c: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma_mean: f64,
    #[arg(long, default_value_t = 10.0)]
    alpha_scale: f64,
    #[arg(long, default_value_t = 0.0)]
    beta_loc: f64,
    #[arg(long, default_value_t = 2.5)]
    beta_scale: f64,
    #[arg(long, default_value_t = 2.5)]
    j_loc: f64,
    #[arg(long, default_value_t = 10.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
}

impl ModelFlags {
    fn spec(&self) -> ModelSpec {
        ModelSpec {
            name: self.model.into(),
            sizes: Sizes {
                n: self.n,
                k: self.k,
                c: self.c,
            },
            hyperparams: Hyperparams {
                sigma_mean: self.sigma_mean,
                alpha_scale: self.alpha_scale,
                beta_loc: self.beta_loc,
                beta_scale: self.beta_scale,
                j_loc: self.j_loc,
                gamma: self.gamma,
                rho: self.rho,
            },
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of rows held out for evaluation.
    #[arg(long, default_value_t = 0.5)]
    holdout: f64,
    /// Output directory for the dataset files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    /// Full experiment config (JSON); generates its own data and ignores
    /// the dataset flags.
    #[arg(long, conflicts_with = "data")]
    config: Option<PathBuf>,
    /// Directory holding a dataset written by `generate`.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MethodArg::Nmc)]
    method: MethodArg,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    rwm_step: f64,
    #[arg(long, default_value_t = 0.1)]
    mala_step: f64,
    #[arg(long, default_value_t = 1e-8)]
    eig_floor: f64,
    #[arg(long)]
    random_scan: bool,
    /// Output directory for trace, metrics and summary files.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Dataset directory (for the held-out part).
    #[arg(long)]
    data: PathBuf,
    /// Run directory holding `trace/*.csv`.
    #[arg(long)]
    trace: PathBuf,
    /// Annotation evaluation mode: z-integrated or conditional-on-z.
    #[arg(long, default_value = "z-integrated")]
    mode: String,
    /// Where to write the recomputed metrics CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Metrics CSV written by `sample` or `evaluate`.
    #[arg(long)]
    metrics: PathBuf,
    /// Where to write the summary JSON.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => generate(args),
        Command::Sample(args) => sample(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Report(args) => report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn generate(args: GenerateArgs) -> CliResult {
    let spec = args.model.spec();
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let dataset = generate_and_split(&spec, &mut rng, args.holdout)?;
    io::write_dataset(&args.out, &spec, &dataset)?;
    println!("wrote {} dataset to {}", spec.name, args.out.display());
    Ok(())
}

fn sample(args: SampleArgs) -> CliResult {
    if let Some(config_path) = &args.config {
        let text = std::fs::read_to_string(config_path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        let out = harness::run_experiment(&cfg)?;
        print_run(&cfg.output_dir, &out);
        return Ok(());
    }
    let data_dir = args
        .data
        .as_ref()
        .ok_or("either --config or --data is required")?;
    let out_dir = args.out.as_ref().ok_or("--out is required with --data")?;
    let (spec, dataset) = io::load_dataset(data_dir)?;
    let mut cfg = ExperimentConfig::new(spec.name, args.method.into(), out_dir);
    cfg.sizes = spec.sizes;
    cfg.hyperparams = spec.hyperparams;
    cfg.num_samples = args.samples;
    cfg.seed = args.seed;
    cfg.rwm_step = args.rwm_step;
    cfg.mala_step = args.mala_step;
    cfg.eig_floor = args.eig_floor;
    cfg.random_scan = args.random_scan;
    // Sampler stream derived from the seed the same way the all-in-one
    // experiment path does it.
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let _data_seed: u64 = master.random();
    let sampler_seed: u64 = master.random();
    let out = harness::run_experiment_on(&cfg, dataset, sampler_seed)?;
    io::write_run_outputs(out_dir, &out)?;
    print_run(out_dir, &out);
    Ok(())
}

fn print_run(dir: &std::path::Path, out: &harness::ExperimentOutput) {
    let s = &out.summary;
    println!(
        "{} + {}: {} samples in {:.2}s, acceptance {:.3}, fallbacks {}",
        s.model, s.method, s.num_samples, s.total_seconds, s.acceptance_rate, s.fallback_count
    );
    if let Some(t) = s.samples_to_convergence {
        println!(
            "samples to convergence: {t} (final predictive ll {:.4})",
            s.final_predictive_ll.unwrap_or(f64::NAN)
        );
    }
    println!("outputs in {}", dir.display());
}

fn evaluate(args: EvaluateArgs) -> CliResult {
    let (_, dataset) = io::load_dataset(&args.data)?;
    let trace = io::read_trace(&args.trace)?;
    let mode = match args.mode.as_str() {
        "z-integrated" => AnnotationEval::ZIntegrated,
        "conditional-on-z" => AnnotationEval::ConditionalOnZ,
        other => return Err(format!("unknown evaluation mode `{other}`").into()),
    };
    let predictive = harness::predictive_ll(&trace, &dataset, mode)
        .ok_or("this dataset has no held-out part to evaluate")?;
    io::write_metrics(&args.out, &trace, Some(&predictive))?;
    println!(
        "samples to convergence: {}",
        harness::samples_to_convergence(&predictive)
    );
    println!("wrote metrics to {}", args.out.display());
    Ok(())
}

fn report(args: ReportArgs) -> CliResult {
    let table = io::read_metrics(&args.metrics)?;
    let report = io::report_from_metrics(&table);
    io::write_json(&args.out, &report)?;
    println!("wrote report to {}", args.out.display());
    Ok(())
}

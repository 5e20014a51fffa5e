//! Experiment orchestration and metrics: runs a configured (model, method)
//! pair, computes the running posterior-averaged predictive log-likelihood
//! of the held-out data, derives samples-to-convergence, and writes
//! machine-readable results (per-node sample CSVs, a metrics CSV and a
//! summary JSON).

pub mod io;

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::Value;
use crate::engine::{self, Method, SamplerConfig, Trace};
use crate::graph::Model;
use crate::linalg::Vector;
use crate::models::{
    build_annotation, build_blr, build_funnel, build_robust, generate_and_split, AnnotationData,
    Dataset, Hyperparams, ModelError, ModelName, ModelSpec, Sizes,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] engine::EngineError),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed file {path}: {message}")]
    Malformed { path: PathBuf, message: String },
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        HarnessError::Malformed {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Predictive evaluation mode for the annotation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AnnotationEval {
    /// Sum the per-item class variable out of the predictive density.
    #[default]
    #[serde(rename = "z-integrated")]
    ZIntegrated,
    /// Complete each held-out item with its per-sample most probable class
    /// and score conditionally on it (diagnostic mode).
    #[serde(rename = "conditional-on-z")]
    ConditionalOnZ,
}

fn default_num_samples() -> usize {
    1000
}
fn default_holdout() -> f64 {
    0.5
}
fn default_rwm_step() -> f64 {
    0.5
}
fn default_mala_step() -> f64 {
    0.1
}
fn default_eig_floor() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelName,
    #[serde(default)]
    pub sizes: Sizes,
    #[serde(default)]
    pub hyperparams: Hyperparams,
    pub method: Method,
    #[serde(default = "default_num_samples")]
    pub num_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
    #[serde(default = "default_eig_floor")]
    pub eig_floor: f64,
    #[serde(default = "default_rwm_step")]
    pub rwm_step: f64,
    #[serde(default = "default_mala_step")]
    pub mala_step: f64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub annotation_eval: AnnotationEval,
    #[serde(default)]
    pub random_scan: bool,
}

impl ExperimentConfig {
    pub fn new(model: ModelName, method: Method, output_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            model,
            sizes: Sizes::default(),
            hyperparams: Hyperparams::default(),
            method,
            num_samples: default_num_samples(),
            seed: 0,
            holdout_fraction: default_holdout(),
            eig_floor: default_eig_floor(),
            rwm_step: default_rwm_step(),
            mala_step: default_mala_step(),
            output_dir: output_dir.into(),
            annotation_eval: AnnotationEval::default(),
            random_scan: false,
        }
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            name: self.model,
            sizes: self.sizes,
            hyperparams: self.hyperparams,
        }
    }

    pub fn sampler_config(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            method: self.method,
            num_samples: self.num_samples,
            seed,
            rwm_step: self.rwm_step,
            mala_step: self.mala_step,
            eig_floor: self.eig_floor,
            random_scan: self.random_scan,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeStats {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub model: ModelName,
    pub method: Method,
    pub num_samples: usize,
    pub seed: u64,
    /// Wall-clock seconds spent inside the sampling loop.
    pub total_seconds: f64,
    pub samples_to_convergence: Option<usize>,
    pub final_predictive_ll: Option<f64>,
    pub acceptance_rate: f64,
    pub min_acceptance_prob: f64,
    pub fallback_count: u64,
    pub node_stats: BTreeMap<String, NodeStats>,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub dataset: Dataset,
    pub trace: Trace,
    pub predictive: Option<Vec<f64>>,
    pub summary: Summary,
}

/// Generate data, run the sampler and compute metrics, without touching
/// the filesystem.
pub fn run_experiment_in_memory(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    let spec = cfg.model_spec();
    spec.validate()?;
    // Independent streams for data generation and sampling, both derived
    // from the experiment seed.
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let data_seed: u64 = master.random();
    let sampler_seed: u64 = master.random();
    let mut data_rng = ChaCha8Rng::seed_from_u64(data_seed);
    let dataset = generate_and_split(&spec, &mut data_rng, cfg.holdout_fraction)?;
    run_experiment_on(cfg, dataset, sampler_seed)
}

/// Run the sampler on an existing dataset.
pub fn run_experiment_on(
    cfg: &ExperimentConfig,
    dataset: Dataset,
    sampler_seed: u64,
) -> Result<ExperimentOutput, HarnessError> {
    let spec = cfg.model_spec();
    let model = build_for(&spec, &dataset);
    let trace = engine::run(&model, &cfg.sampler_config(sampler_seed))?;
    let predictive = predictive_ll(&trace, &dataset, cfg.annotation_eval);
    let summary = summarize(cfg, &trace, predictive.as_deref());
    Ok(ExperimentOutput {
        dataset,
        trace,
        predictive,
        summary,
    })
}

/// Full experiment: generate, sample, evaluate, and write the dataset,
/// per-node sample CSVs, metrics CSV and summary JSON under
/// `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    let out = run_experiment_in_memory(cfg)?;
    io::write_dataset(&cfg.output_dir.join("dataset"), &cfg.model_spec(), &out.dataset)?;
    io::write_run_outputs(&cfg.output_dir, &out)?;
    Ok(out)
}

pub fn build_for(spec: &ModelSpec, dataset: &Dataset) -> Model {
    match dataset {
        Dataset::Funnel => build_funnel(),
        Dataset::Blr { train, .. } => build_blr(spec, train),
        Dataset::Robust { train, .. } => build_robust(spec, train),
        Dataset::Annotation { train, .. } => build_annotation(spec, train),
    }
}

fn summarize(cfg: &ExperimentConfig, trace: &Trace, predictive: Option<&[f64]>) -> Summary {
    let mut node_stats = BTreeMap::new();
    for (i, name) in trace.node_names.iter().enumerate() {
        let rows: Vec<Vec<f64>> = trace.samples[i].iter().map(Value::coords).collect();
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for row in &rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut sd = vec![0.0; dim];
        for row in &rows {
            for ((s, v), m) in sd.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        for s in &mut sd {
            *s = s.sqrt();
        }
        node_stats.insert(name.clone(), NodeStats { mean, sd });
    }
    Summary {
        model: cfg.model,
        method: cfg.method,
        num_samples: cfg.num_samples,
        seed: cfg.seed,
        total_seconds: trace.elapsed_seconds.last().copied().unwrap_or(0.0),
        samples_to_convergence: predictive.map(samples_to_convergence),
        final_predictive_ll: predictive.and_then(|s| s.last().copied()),
        acceptance_rate: trace.acceptance_rate(),
        min_acceptance_prob: trace.min_acceptance_prob,
        fallback_count: trace.total_fallbacks(),
        node_stats,
    }
}

/// Smallest 1-based index t such that every later value of the series stays
/// within 1% of the final value.
pub fn samples_to_convergence(series: &[f64]) -> usize {
    assert!(!series.is_empty(), "series must be nonempty");
    let end = *series.last().expect("nonempty");
    let band = 0.01 * end.abs();
    let mut t = series.len();
    for s in (0..series.len()).rev() {
        if (series[s] - end).abs() <= band {
            t = s + 1;
        } else {
            break;
        }
    }
    t
}

/// Per-sample series of the running posterior-averaged predictive
/// log-likelihood: `log((1/t) sum_{s<=t} p(heldout | theta_s))`, evaluated
/// in log space. Returns `None` when the dataset has no held-out part.
pub fn predictive_ll(trace: &Trace, dataset: &Dataset, mode: AnnotationEval) -> Option<Vec<f64>> {
    let per_sample = per_sample_heldout_ll(trace, dataset, mode)?;
    Some(running_log_mean_exp(&per_sample))
}

/// log of a running mean of exp(values), computed stably.
pub fn running_log_mean_exp(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for (t, &v) in values.iter().enumerate() {
        if v > max {
            sum = if max.is_finite() { sum * (max - v).exp() } else { 0.0 };
            sum += 1.0;
            max = v;
        } else {
            sum += (v - max).exp();
        }
        out.push(max + (sum / (t + 1) as f64).ln());
    }
    out
}

fn per_sample_heldout_ll(
    trace: &Trace,
    dataset: &Dataset,
    mode: AnnotationEval,
) -> Option<Vec<f64>> {
    match dataset {
        Dataset::Funnel => None,
        Dataset::Blr { heldout, .. } => {
            let alpha = trace.node_index("alpha")?;
            let beta = trace.node_index("beta")?;
            Some(
                (0..trace.num_samples())
                    .map(|t| {
                        let a = trace.samples[alpha][t].as_real();
                        let b = coords_vector(&trace.samples[beta][t]);
                        blr_heldout_ll(a, &b, heldout)
                    })
                    .collect(),
            )
        }
        Dataset::Robust { heldout, .. } => {
            let nu = trace.node_index("nu")?;
            let sigma = trace.node_index("sigma")?;
            let alpha = trace.node_index("alpha")?;
            let beta = trace.node_index("beta")?;
            Some(
                (0..trace.num_samples())
                    .map(|t| {
                        robust_heldout_ll(
                            trace.samples[nu][t].as_real(),
                            trace.samples[sigma][t].as_real(),
                            trace.samples[alpha][t].as_real(),
                            &coords_vector(&trace.samples[beta][t]),
                            heldout,
                        )
                    })
                    .collect(),
            )
        }
        Dataset::Annotation { heldout, .. } => {
            let pi = trace.node_index("pi")?;
            let classes = trace.samples[pi]
                .first()
                .map_or(0, |v| v.coords().len());
            let max_labeler = heldout
                .items
                .iter()
                .flat_map(|item| item.labelers.iter().copied())
                .max()
                .unwrap_or(0);
            // resolve confusion-row node indices once
            let theta_idx: Vec<Vec<usize>> = (0..=max_labeler)
                .map(|l| {
                    (0..classes)
                        .map(|c| {
                            trace
                                .node_index(&crate::models::theta_node_name(l, c))
                                .expect("confusion nodes are traced")
                        })
                        .collect()
                })
                .collect();
            Some(
                (0..trace.num_samples())
                    .map(|t| annotation_heldout_ll(trace, t, pi, &theta_idx, heldout, mode))
                    .collect(),
            )
        }
    }
}

fn coords_vector(v: &Value) -> Vector {
    Vector::from_vec(v.coords())
}

fn blr_heldout_ll(alpha: f64, beta: &Vector, heldout: &crate::models::BlrData) -> f64 {
    let mut acc = 0.0;
    for i in 0..heldout.len() {
        let mut logit = alpha;
        for j in 0..heldout.x.ncols() {
            logit += heldout.x[(i, j)] * beta[j];
        }
        let softplus = logit.max(0.0) + (-logit.abs()).exp().ln_1p();
        acc += heldout.y[i] as f64 * logit - softplus;
    }
    acc
}

fn robust_heldout_ll(
    nu: f64,
    sigma: f64,
    alpha: f64,
    beta: &Vector,
    heldout: &crate::models::RobustData,
) -> f64 {
    use crate::autodiff::special::ln_gamma;
    let constant = ln_gamma((nu + 1.0) / 2.0)
        - ln_gamma(nu / 2.0)
        - 0.5 * (nu * std::f64::consts::PI).ln()
        - sigma.ln();
    let mut acc = heldout.len() as f64 * constant;
    for i in 0..heldout.len() {
        let mut mu = alpha;
        for j in 0..heldout.x.ncols() {
            mu += heldout.x[(i, j)] * beta[j];
        }
        let z = (heldout.y[i] - mu) / sigma;
        acc += -(nu + 1.0) / 2.0 * (z * z / nu).ln_1p();
    }
    acc
}

fn annotation_heldout_ll(
    trace: &Trace,
    t: usize,
    pi_idx: usize,
    theta_idx: &[Vec<usize>],
    heldout: &AnnotationData,
    mode: AnnotationEval,
) -> f64 {
    let pi = coords_vector(&trace.samples[pi_idx][t]);
    let classes = pi.len();
    let mut acc = 0.0;
    for item in &heldout.items {
        // per-class joint log-weight of this item's labels
        let mut class_lp: Vec<f64> = (0..classes).map(|c| pi[c].ln()).collect();
        for (&l, &y) in item.labelers.iter().zip(&item.labels) {
            for (c, lp) in class_lp.iter_mut().enumerate() {
                let row = &trace.samples[theta_idx[l][c]][t];
                *lp += row.as_real_vec()[y as usize].ln();
            }
        }
        match mode {
            AnnotationEval::ZIntegrated => {
                let max = class_lp.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let lse = max + class_lp.iter().map(|lp| (lp - max).exp()).sum::<f64>().ln();
                acc += lse;
            }
            AnnotationEval::ConditionalOnZ => {
                // most probable completion, scored without the class prior
                let best = class_lp
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(c, _)| c)
                    .expect("at least one class");
                acc += class_lp[best] - pi[best].ln();
            }
        }
    }
    acc
}

/// Posterior mode of an integer-valued node over the trace.
pub fn posterior_mode_int(trace: &Trace, name: &str, classes: usize) -> i64 {
    let mut counts = vec![0usize; classes];
    for v in trace.samples_for(name) {
        counts[v.as_int() as usize] += 1;
    }
    counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(k, _)| k as i64)
        .expect("at least one class")
}

/// Majority vote over an item's labels; ties broken toward the smaller
/// class index.
pub fn majority_vote(item: &crate::models::AnnotationItem, classes: usize) -> i64 {
    let mut counts = vec![0usize; classes];
    for &y in &item.labels {
        counts[y as usize] += 1;
    }
    counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(k, _)| k as i64)
        .expect("at least one class")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn convergence_of_a_constant_series_is_one() {
        assert_eq!(samples_to_convergence(&[-3.0, -3.0, -3.0]), 1);
        assert_eq!(samples_to_convergence(&[-3.0]), 1);
    }

    #[test]
    fn convergence_matches_the_hand_worked_series() {
        // band is 0.5 around -50: first index from which everything stays
        // inside [-50.5, -49.5] is the third entry.
        let series = [-100.0, -52.0, -50.4, -50.1, -50.0];
        assert_eq!(samples_to_convergence(&series), 3);
    }

    #[test]
    fn convergence_can_be_the_last_sample() {
        let series = [-100.0, -80.0, -50.0];
        assert_eq!(samples_to_convergence(&series), 3);
    }

    #[test]
    fn running_log_mean_exp_of_equal_terms_is_flat() {
        let series = running_log_mean_exp(&[-7.0, -7.0, -7.0, -7.0]);
        for v in series {
            assert_relative_eq!(v, -7.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn running_log_mean_exp_matches_direct_evaluation() {
        let lls = [-3.0, -1.0, -2.5, -0.5];
        let series = running_log_mean_exp(&lls);
        for t in 0..lls.len() {
            let direct =
                (lls[..=t].iter().map(|v| v.exp()).sum::<f64>() / (t + 1) as f64).ln();
            assert_relative_eq!(series[t], direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn majority_vote_breaks_ties_toward_the_smaller_class() {
        let item = crate::models::AnnotationItem {
            labelers: vec![0, 1],
            labels: vec![2, 1],
        };
        assert_eq!(majority_vote(&item, 3), 1);
    }
}

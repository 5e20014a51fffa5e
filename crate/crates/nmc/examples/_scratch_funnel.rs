use nmc::distributions::Value;
use nmc::engine::{run, Method, SamplerConfig};
use nmc::models::build_funnel;

fn ks_vs_normal(samples: &mut [f64], sd: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let cdf = nmc::distributions::normal_cdf(x / sd);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((cdf - lo).abs().max((hi - cdf).abs()));
    }
    d
}

fn main() {
    let model = build_funnel();
    for (method, step, seeds) in [(Method::Nmc, 0.5, vec![1u64,2,3]), (Method::Rwm, 0.5, vec![1,2,3])] {
        for seed in seeds {
            let mut cfg = SamplerConfig::new(method, 10_000, seed);
            cfg.rwm_step = step;
            let trace = run(&model, &cfg).unwrap();
            let mut zs: Vec<f64> = trace.samples_for("z").iter().map(Value::as_real).collect();
            let mean = zs.iter().sum::<f64>() / zs.len() as f64;
            let sd = (zs.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / zs.len() as f64).sqrt();
            let ks = ks_vs_normal(&mut zs, 3.0);
            println!("{method} seed {seed}: mean {mean:+.4} sd {sd:.4} ks {ks:.4} acc {:.3} fallbacks {}", trace.acceptance_rate(), trace.total_fallbacks());
        }
    }
}

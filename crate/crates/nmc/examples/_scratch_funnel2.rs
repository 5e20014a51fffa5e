use nmc::distributions::{normal_cdf, Value};
use nmc::engine::{run, Method, SamplerConfig};
use nmc::models::build_funnel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ks_vs_normal(samples: &mut [f64], sd: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let cdf = normal_cdf(x / sd);
        d = d.max((cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs()));
    }
    d
}

fn stats(zs: &mut Vec<f64>) -> (f64, f64, f64) {
    let mean = zs.iter().sum::<f64>() / zs.len() as f64;
    let sd = (zs.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / zs.len() as f64).sqrt();
    let ks = ks_vs_normal(zs, 3.0);
    (mean, sd, ks)
}

// exact single-site Gibbs on the funnel: z | x via inverse-cdf on a fine grid
fn gibbs_funnel(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = 3.0 * { let v: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng); v };
    let mut x = (z / 2.0f64).exp() * { let v: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng); v };
    let mut out = Vec::with_capacity(n);
    let grid: Vec<f64> = (0..4001).map(|i| -20.0 + i as f64 * 0.01).collect();
    for _ in 0..n {
        // z | x
        let logw: Vec<f64> = grid.iter().map(|&v| -v * v / 18.0 - v / 2.0 - x * x * (-v).exp() / 2.0).collect();
        let m = logw.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let w: Vec<f64> = logw.iter().map(|lw| (lw - m).exp()).collect();
        let total: f64 = w.iter().sum();
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        for (i, wi) in w.iter().enumerate() {
            acc += wi;
            if acc >= u { z = grid[i]; break; }
        }
        // x | z exact
        x = (z / 2.0f64).exp() * { let v: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng); v };
        out.push(z);
    }
    out
}

fn main() {
    let model = build_funnel();
    println!("ideal gibbs reference:");
    for seed in 0..6u64 {
        let mut zs = gibbs_funnel(10_000, seed);
        let (m, s, k) = stats(&mut zs);
        println!("  seed {seed}: mean {m:+.4} sd {s:.4} ks {k:.4}");
    }
    for method in [Method::Nmc, Method::Rwm] {
        let mut pass = 0;
        for seed in 0..12u64 {
            let cfg = SamplerConfig::new(method, 10_000, seed);
            let trace = run(&model, &cfg).unwrap();
            let mut zs: Vec<f64> = trace.samples_for("z").iter().map(Value::as_real).collect();
            let (m, s, k) = stats(&mut zs);
            let ok = m.abs() <= 0.15 && (2.7..=3.3).contains(&s) && k < 0.03;
            pass += i32::from(ok);
            println!("{method} seed {seed}: mean {m:+.4} sd {s:.4} ks {k:.4} pass={ok}");
        }
        println!("{method}: {pass}/12 pass all three");
    }
}

use nmc::distributions::Value;
use nmc::engine::{run, Method, SamplerConfig};
use nmc::harness::{self, predictive_ll, samples_to_convergence, AnnotationEval};
use nmc::linalg::Vector;
use nmc::models::*;

fn main() {
    let mut spec = ModelSpec::new(ModelName::Robust);
    spec.sizes.n = 2000; spec.sizes.k = 10;
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
    let ds = generate_and_split(&spec, &mut rng, 0.5).unwrap();
    let truth = match &ds { Dataset::Robust { truth, .. } => truth, _ => unreachable!() };
    println!("truth: nu {:.2} sigma {:.3} alpha {:+.3}", truth.nu, truth.sigma, truth.alpha);
    let model = harness::build_for(&spec, &ds);
    let cfg = SamplerConfig::new(Method::Nmc, 600, 101);
    let trace = run(&model, &cfg).unwrap();
    let pred = predictive_ll(&trace, &ds, AnnotationEval::ZIntegrated).unwrap();
    println!("conv {}", samples_to_convergence(&pred));
    for (i, name) in trace.node_names.iter().enumerate() {
        println!("{name}: acc {}/{} fb {}", trace.accept_counts[i], trace.proposal_counts[i], trace.fallback_counts[i]);
    }
    for t in [0usize, 1, 2, 5, 10, 20, 50, 100, 200, 400, 599] {
        let nu = trace.samples_for("nu")[t].as_real();
        let sg = trace.samples_for("sigma")[t].as_real();
        let al = trace.samples_for("alpha")[t].as_real();
        let b = Vector::from_vec(trace.samples_for("beta")[t].coords());
        println!("t={t:>4} pred={:>10.2} nu={nu:>8.3} sigma={sg:>8.4} alpha={al:+.3} |beta-truth|={:.4}", pred[t], (&b - &truth.beta).norm());
    }
}

use nmc::engine::{run, Method, SamplerConfig};
use nmc::harness::{self, predictive_ll, samples_to_convergence, AnnotationEval};
use nmc::models::*;

fn main() {
    // robust: N=2000 (train 1000), K=10
    let mut spec = ModelSpec::new(ModelName::Robust);
    spec.sizes.n = 2000; spec.sizes.k = 10;
    for seed in [1u64, 2, 3] {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let ds = generate_and_split(&spec, &mut rng, 0.5).unwrap();
        let model = harness::build_for(&spec, &ds);
        for method in [Method::Nmc, Method::Rwm] {
            let cfg = SamplerConfig::new(method, 1000, seed + 100);
            let t0 = std::time::Instant::now();
            let trace = run(&model, &cfg).unwrap();
            let pred = predictive_ll(&trace, &ds, AnnotationEval::ZIntegrated).unwrap();
            let conv = samples_to_convergence(&pred);
            println!("robust seed {seed} {method}: conv {conv} final {:.2} acc {:.3} fb {} [{:.1}s]",
                pred.last().unwrap(), trace.acceptance_rate(), trace.total_fallbacks(), t0.elapsed().as_secs_f64());
        }
    }
    // annotation: N=500 (train 250), K=20, C=3
    let mut spec = ModelSpec::new(ModelName::Annotation);
    spec.sizes.n = 500; spec.sizes.k = 20; spec.sizes.c = 3;
    for seed in [1u64, 2, 3] {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let ds = generate_and_split(&spec, &mut rng, 0.5).unwrap();
        let model = harness::build_for(&spec, &ds);
        let cfg = SamplerConfig::new(Method::Nmc, 1000, seed + 100);
        let t0 = std::time::Instant::now();
        let trace = run(&model, &cfg).unwrap();
        let pred = predictive_ll(&trace, &ds, AnnotationEval::ZIntegrated).unwrap();
        let conv = samples_to_convergence(&pred);
        // z accuracy vs majority vote
        let (train, c) = match &ds { Dataset::Annotation { train, .. } => (train, 3usize), _ => unreachable!() };
        let mut nmc_correct = 0; let mut mv_correct = 0;
        for (i, item) in train.items.iter().enumerate() {
            let mode = harness::posterior_mode_int(&trace, &z_node_name(i), c);
            nmc_correct += i32::from(mode == train.true_z[i]);
            mv_correct += i32::from(harness::majority_vote(item, c) == train.true_z[i]);
        }
        let n = train.len() as f64;
        println!("annotation seed {seed}: conv {conv} final {:.2} acc {:.3} fb {} z-acc {:.3} mv-acc {:.3} [{:.1}s]",
            pred.last().unwrap(), trace.acceptance_rate(), trace.total_fallbacks(),
            nmc_correct as f64 / n, mv_correct as f64 / n, t0.elapsed().as_secs_f64());
    }
}

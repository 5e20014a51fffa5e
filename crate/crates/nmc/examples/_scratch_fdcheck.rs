// quick scratch: FD-check BLR beta blanket derivatives + inspect NMC behavior
use nmc::autodiff::ScalarFn;
use nmc::distributions::Value;
use nmc::engine::{run, Method, SamplerConfig};
use nmc::harness::{predictive_ll, AnnotationEval};
use nmc::linalg::Vector;
use nmc::models::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut spec = ModelSpec::new(ModelName::Blr);
    spec.sizes.n = 60;
    spec.sizes.k = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let dataset = generate_and_split(&spec, &mut rng, 0.5).unwrap();
    let (train, heldout, truth) = match &dataset {
        Dataset::Blr { train, heldout, truth } => (train, heldout, truth),
        _ => unreachable!(),
    };
    let model = build_blr(&spec, train);
    let mut wrng = ChaCha8Rng::seed_from_u64(3);
    let world = model.init_world(&mut wrng).unwrap();
    let beta_id = model.node_id("beta").unwrap();
    let blanket = model.blanket_score_fn(&world, beta_id);
    let x0 = blanket.current();
    let (v, gh) = blanket.grad_hess(&x0).unwrap();
    println!("value {v}");
    let h = 1e-5;
    for i in 0..3 {
        let mut xp = x0.clone(); xp[i] += h;
        let mut xm = x0.clone(); xm[i] -= h;
        let g_fd = (blanket.eval_f64(&xp) - blanket.eval_f64(&xm)) / (2.0 * h);
        println!("grad[{i}] ad {:+.8e} fd {:+.8e}", gh.grad[i], g_fd);
        let h_fd = (blanket.eval_f64(&xp) - 2.0 * blanket.eval_f64(&x0) + blanket.eval_f64(&xm)) / (h * h);
        println!("hess[{i}{i}] ad {:+.8e} fd {:+.8e}", gh.hess[(i,i)], h_fd);
    }
    // now a medium BLR run: trajectory of predictive + beta distance to truth
    let mut spec2 = ModelSpec::new(ModelName::Blr);
    spec2.sizes.n = 2000; spec2.sizes.k = 10;
    let mut rng2 = ChaCha8Rng::seed_from_u64(11);
    let ds2 = generate_and_split(&spec2, &mut rng2, 0.5).unwrap();
    let (train2, truth2) = match &ds2 { Dataset::Blr { train, truth, .. } => (train, truth), _ => unreachable!() };
    let model2 = build_blr(&spec2, train2);
    let cfg = SamplerConfig::new(Method::Nmc, 40, 1);
    let trace = run(&model2, &cfg).unwrap();
    let pred = predictive_ll(&trace, &ds2, AnnotationEval::ZIntegrated).unwrap();
    let betas = trace.samples_for("beta");
    let alphas = trace.samples_for("alpha");
    println!("true alpha {} beta {:?}", truth2.alpha, truth2.beta.as_slice());
    for t in [0usize, 1, 2, 5, 10, 20, 39] {
        let b = Vector::from_vec(betas[t].coords());
        let dist = (&b - &truth2.beta).norm();
        println!("t={t} pred={:.2} logp={:.2} alpha={:+.3} |beta-349truth|={:.3}", pred[t], trace.log_density[t], alphas[t].as_real(), dist);
    }
}

use nmc::autodiff::ScalarFn;
use nmc::distributions::Value;
use nmc::linalg::Vector;
use nmc::models::*;
use nmc::proposers::{propose_real, ProposalKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut spec = ModelSpec::new(ModelName::Blr);
    spec.sizes.n = 2000; spec.sizes.k = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let ds = generate_and_split(&spec, &mut rng, 0.5).unwrap();
    let train = match &ds { Dataset::Blr { train, .. } => train, _ => unreachable!() };
    let model = build_blr(&spec, train);
    let mut wrng = ChaCha8Rng::seed_from_u64(5);
    let mut world = model.init_world(&mut wrng).unwrap();
    let beta = model.node_id("beta").unwrap();
    let alpha = model.node_id("alpha").unwrap();
    (world, _) = model.apply_move(&world, alpha, Value::Real(0.0)).unwrap();
    (world, _) = model.apply_move(&world, beta, Value::RealVec(Vector::zeros(10))).unwrap();
    // a few manual newton steps accepting the mean directly, to see where IRLS goes
    for step in 0..8 {
        let blanket = model.blanket_score_fn(&world, beta);
        let x = blanket.current();
        let (f, gh) = blanket.grad_hess(&x).unwrap();
        let p = propose_real(&Vector::from_row_slice(&x), &gh, 1e-8).unwrap();
        if let ProposalKind::MvNormal { mean, .. } = &p.kind {
            let f_mean = blanket.eval_f64(mean.as_slice());
            println!("step {step}: f={f:.2} -> f(newton mean)={:.2}, |move|={:.3}", f_mean, (mean - Vector::from_row_slice(&x)).norm());
            if f_mean > f {
                let (w2, _) = model.apply_move(&world, beta, Value::RealVec(mean.clone())).unwrap();
                world = w2;
            } else { println!("  newton mean decreases f; stopping"); break; }
        }
    }
}

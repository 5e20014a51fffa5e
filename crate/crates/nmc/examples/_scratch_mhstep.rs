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
    let world = model.init_world(&mut wrng).unwrap();
    let beta = model.node_id("beta").unwrap();
    let blanket = model.blanket_score_fn(&world, beta);
    let x0 = blanket.current();
    let (v0, gh) = blanket.grad_hess(&x0).unwrap();
    println!("f(beta0) = {v0:.2}, |grad| = {:.2}", gh.grad.norm());
    let (evals, _) = nmc::linalg::SymmetricMatrix::new(-gh.hess.clone()).unwrap().eig_sym().unwrap();
    println!("neg-hess eigs: {:?}", evals.as_slice().iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());
    let p = propose_real(&Vector::from_row_slice(&x0), &gh, 1e-8).unwrap();
    if let ProposalKind::MvNormal { mean, .. } = &p.kind {
        println!("proposal mean dist from current: {:.3}", (mean - Vector::from_row_slice(&x0)).norm());
        // value of the blanket at the proposal mean:
        let f_mean = blanket.eval_f64(mean.as_slice());
        println!("f(mean) = {f_mean:.2}  (delta {:+.2})", f_mean - v0);
        let mut srng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..5 {
            let cand = p.sample(&mut srng);
            let lq_fwd = p.log_density(&cand);
            let xc = cand.coords();
            let f_cand = blanket.eval_f64(&xc);
            // reverse
            let (w2, delta) = model.apply_move(&world, beta, cand.clone()).unwrap();
            let b2 = model.blanket_score_fn(&w2, beta);
            let (_, gh2) = b2.grad_hess(&xc).unwrap();
            let p_rev = propose_real(&Vector::from_vec(xc.clone()), &gh2, 1e-8).unwrap();
            let lq_rev = p_rev.log_density(&Value::RealVec(Vector::from_vec(x0.clone())));
            println!("trial {trial}: delta={delta:+.1} f_cand-f0={:+.1} lq_fwd={lq_fwd:.1} lq_rev={lq_rev:.1} ratio={:+.1}",
                f_cand - v0, delta + lq_rev - lq_fwd);
        }
    }
}

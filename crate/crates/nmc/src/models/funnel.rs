//! The funnel: `z ~ N(0, 3)`, `x ~ N(0, e^{z/2})`, both scale parameters
//! read as standard deviations. The local scale of `x` varies exponentially
//! with `z`, which defeats fixed-step samplers.

use crate::autodiff::Scalar;
use crate::distributions::{Distribution, Support, ValueRef};
use crate::graph::{build_model, GenericBuilder, Model, NodeDecl};

struct ScaleFromParent;

impl GenericBuilder for ScaleFromParent {
    fn build<S: Scalar>(&self, parents: &[ValueRef<'_, S>]) -> Distribution<S> {
        Distribution::Normal {
            mean: S::constant(0.0),
            sd: (parents[0].real() * 0.5).exp(),
        }
    }
}

pub fn build_funnel() -> Model {
    build_model(vec![
        NodeDecl::prior("z", Distribution::Normal { mean: 0.0, sd: 3.0 }),
        NodeDecl::latent("x", &["z"], Support::RealVector(1), ScaleFromParent),
    ])
    .expect("the funnel definition is well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ScalarFn;
    use crate::distributions::Value;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn log_normal_pdf(x: f64, sd: f64) -> f64 {
        -sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * (x / sd) * (x / sd)
    }

    #[test]
    fn x_blanket_is_standard_normal_at_z_zero() {
        let m = build_funnel();
        let z = m.node_id("z").unwrap();
        let x = m.node_id("x").unwrap();
        let mut w = m.init_world(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        (w, _) = m.apply_move(&w, z, Value::Real(0.0)).unwrap();
        let blanket = m.blanket_score_fn(&w, x);
        for v in [-2.0, -0.5, 0.0, 1.0, 3.0] {
            assert_relative_eq!(blanket.eval_f64(&[v]), log_normal_pdf(v, 1.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn joint_log_density_at_the_origin() {
        let m = build_funnel();
        let z = m.node_id("z").unwrap();
        let x = m.node_id("x").unwrap();
        let mut w = m.init_world(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        (w, _) = m.apply_move(&w, z, Value::Real(0.0)).unwrap();
        (w, _) = m.apply_move(&w, x, Value::Real(0.0)).unwrap();
        assert_relative_eq!(
            w.total_log_density(),
            log_normal_pdf(0.0, 3.0) + log_normal_pdf(0.0, 1.0),
            epsilon = 1e-12
        );
    }
}

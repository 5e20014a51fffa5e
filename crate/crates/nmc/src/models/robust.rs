//! Robust regression with Student-t noise:
//! `nu ~ Gamma(2, 0.1)`, `sigma ~ Exponential(sigma_mean)`,
//! `alpha ~ N(0, alpha_scale)`, `beta ~ N(beta_loc, beta_scale)^K`,
//! `X_ij ~ N(0, 10)`, `Y_i ~ StudentT(nu, alpha + X_i . beta, sigma)`.
//!
//! The exponential is parameterized by its mean (rate `1 / sigma_mean`).

use rand::Rng;
use rand_distr::Distribution as RandDistribution;

use crate::autodiff::Scalar;
use crate::distributions::{Distribution, IidShape, Support, Value, ValueRef};
use crate::graph::{build_model, FixedDist, GenericBuilder, Model, NodeDecl};
use crate::linalg::{Matrix, Vector};

use super::ModelSpec;

#[derive(Debug, Clone)]
pub struct RobustData {
    pub x: Matrix,
    pub y: Vector,
}

impl RobustData {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.len() == 0
    }

    pub fn subset(&self, rows: &[usize]) -> RobustData {
        RobustData {
            x: Matrix::from_fn(rows.len(), self.x.ncols(), |i, j| self.x[(rows[i], j)]),
            y: Vector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i])),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RobustTruth {
    pub nu: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: Vector,
}

pub fn generate_robust<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> (RobustData, RobustTruth) {
    let (n, k) = (spec.sizes.n, spec.sizes.k);
    let h = &spec.hyperparams;
    let std_normal = rand_distr::StandardNormal;
    let nu = rand_distr::Gamma::new(2.0, 1.0 / 0.1)
        .expect("fixed shape and rate")
        .sample(rng);
    let sigma = rand_distr::Exp::new(1.0 / h.sigma_mean)
        .expect("validated sigma_mean")
        .sample(rng);
    let alpha = h.alpha_scale * {
        let z: f64 = std_normal.sample(rng);
        z
    };
    let beta = Vector::from_iterator(k, (0..k).map(|_| {
        let z: f64 = std_normal.sample(rng);
        h.beta_loc + h.beta_scale * z
    }));
    let x = Matrix::from_fn(n, k, |_, _| {
        let z: f64 = std_normal.sample(rng);
        10.0 * z
    });
    let t = rand_distr::StudentT::new(nu).expect("positive dof");
    let y = Vector::from_iterator(
        n,
        (0..n).map(|i| {
            let mu = alpha + x.row(i).iter().zip(beta.iter()).map(|(xv, b)| xv * b).sum::<f64>();
            mu + sigma * t.sample(rng)
        }),
    );
    (
        RobustData { x, y },
        RobustTruth {
            nu,
            sigma,
            alpha,
            beta,
        },
    )
}

/// Observed responses given [nu, sigma, alpha, beta, x].
struct StudentTRegression;

impl GenericBuilder for StudentTRegression {
    fn build<S: Scalar>(&self, p: &[ValueRef<'_, S>]) -> Distribution<S> {
        let dof = p[0].real();
        let scale = p[1].real();
        let alpha = p[2].real();
        let beta = p[3].real_vec();
        let x = p[4].matrix();
        let locs = (0..x.nrows())
            .map(|i| {
                let dot = S::weighted_sum((0..x.ncols()).map(|j| (x[(i, j)], &beta[j])));
                alpha.clone() + dot
            })
            .collect();
        Distribution::StudentTIid { dof, locs, scale }
    }
}

pub fn build_robust(spec: &ModelSpec, train: &RobustData) -> Model {
    let h = &spec.hyperparams;
    let n = train.len();
    let k = train.x.ncols();
    build_model(vec![
        NodeDecl::prior("nu", Distribution::Gamma { shape: 2.0, rate: 0.1 }),
        NodeDecl::prior("sigma", Distribution::Exponential { mean: h.sigma_mean }),
        NodeDecl::prior(
            "alpha",
            Distribution::Normal {
                mean: 0.0,
                sd: h.alpha_scale,
            },
        ),
        NodeDecl::prior(
            "beta",
            Distribution::NormalIid {
                mean: h.beta_loc,
                sd: h.beta_scale,
                shape: IidShape::Vec(k),
            },
        ),
        NodeDecl::observed(
            "x",
            &[],
            Support::RealVector(n * k),
            FixedDist(Distribution::NormalIid {
                mean: 0.0,
                sd: 10.0,
                shape: IidShape::Mat(n, k),
            }),
            Value::RealMat(train.x.clone()),
        ),
        NodeDecl::observed(
            "y",
            &["nu", "sigma", "alpha", "beta", "x"],
            Support::RealVector(n),
            StudentTRegression,
            Value::RealVec(train.y.clone()),
        ),
    ])
    .expect("the robust regression definition is well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelName;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_spec() -> ModelSpec {
        let mut spec = ModelSpec::new(ModelName::Robust);
        spec.sizes.n = 30;
        spec.sizes.k = 2;
        spec
    }

    #[test]
    fn positive_nodes_route_to_the_half_space_support() {
        let spec = small_spec();
        let (data, _) = generate_robust(&spec, &mut ChaCha8Rng::seed_from_u64(2));
        let model = build_robust(&spec, &data);
        for name in ["nu", "sigma"] {
            let id = model.node_id(name).unwrap();
            assert_eq!(model.support(id), Support::PositiveReal);
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let spec = small_spec();
        let (a, ta) = generate_robust(&spec, &mut ChaCha8Rng::seed_from_u64(11));
        let (b, tb) = generate_robust(&spec, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        assert_eq!(ta.sigma, tb.sigma);
    }

    #[test]
    fn large_dof_limit_approaches_the_gaussian_likelihood() {
        // At nu = 1e6 and residuals of ordinary size (scoring at the
        // generating parameters) the Student-t log-likelihood sits within
        // 0.1% of the Gaussian one.
        let spec = small_spec();
        let (data, truth) = generate_robust(&spec, &mut ChaCha8Rng::seed_from_u64(4));
        let model = build_robust(&spec, &data);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut world = model.init_world(&mut rng).unwrap();
        for (name, v) in [("nu", 1e6), ("sigma", truth.sigma), ("alpha", truth.alpha)] {
            let id = model.node_id(name).unwrap();
            (world, _) = model.apply_move(&world, id, Value::Real(v)).unwrap();
        }
        let beta_id = model.node_id("beta").unwrap();
        (world, _) = model
            .apply_move(&world, beta_id, Value::RealVec(truth.beta.clone()))
            .unwrap();
        let y_id = model.node_id("y").unwrap();
        let t_ll = model.node_score(&world, y_id);
        let mut gauss_ll = 0.0;
        for i in 0..data.len() {
            let mu = truth.alpha
                + data
                    .x
                    .row(i)
                    .iter()
                    .zip(truth.beta.iter())
                    .map(|(x, b)| x * b)
                    .sum::<f64>();
            let z = (data.y[i] - mu) / truth.sigma;
            gauss_ll +=
                -truth.sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * z * z;
        }
        assert_relative_eq!(t_ll, gauss_ll, max_relative = 1e-3);
    }
}

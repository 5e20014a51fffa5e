//! Bayesian logistic regression:
//! `alpha ~ N(0, 10)`, `beta ~ N(0, 2.5)^K`, `X_ij ~ N(0, 10)`,
//! `Y_i ~ Bernoulli(logit = alpha + X_i . beta)`.

use rand::Rng;
use rand_distr::Distribution as RandDistribution;

use crate::autodiff::Scalar;
use crate::distributions::{Distribution, IidShape, Support, Value, ValueRef};
use crate::graph::{build_model, FixedDist, GenericBuilder, Model, NodeDecl};
use crate::linalg::{Matrix, Vector};

use super::ModelSpec;

#[derive(Debug, Clone)]
pub struct BlrData {
    pub x: Matrix,
    pub y: Vec<i64>,
}

impl BlrData {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> BlrData {
        BlrData {
            x: Matrix::from_fn(rows.len(), self.x.ncols(), |i, j| self.x[(rows[i], j)]),
            y: rows.iter().map(|&i| self.y[i]).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlrTruth {
    pub alpha: f64,
    pub beta: Vector,
}

/// P(Y = 1) for one covariate row under given coefficients.
pub fn label_probability(alpha: f64, beta: &Vector, row: &[f64]) -> f64 {
    let logit = alpha + beta.iter().zip(row).map(|(b, x)| b * x).sum::<f64>();
    1.0 / (1.0 + (-logit).exp())
}

pub fn generate_blr<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> (BlrData, BlrTruth) {
    let (n, k) = (spec.sizes.n, spec.sizes.k);
    let h = &spec.hyperparams;
    let std_normal = rand_distr::StandardNormal;
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
    let y = (0..n)
        .map(|i| {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            let p = label_probability(alpha, &beta, &row);
            i64::from(rng.random::<f64>() < p)
        })
        .collect();
    (BlrData { x, y }, BlrTruth { alpha, beta })
}

/// Observed labels given [alpha, beta, x]: a product of Bernoullis with
/// per-row logits `alpha + X_i . beta`.
struct LogitLikelihood;

impl GenericBuilder for LogitLikelihood {
    fn build<S: Scalar>(&self, p: &[ValueRef<'_, S>]) -> Distribution<S> {
        let alpha = p[0].real();
        let beta = p[1].real_vec();
        let x = p[2].matrix();
        let logits = (0..x.nrows())
            .map(|i| {
                let dot = S::weighted_sum((0..x.ncols()).map(|j| (x[(i, j)], &beta[j])));
                alpha.clone() + dot
            })
            .collect();
        Distribution::BernoulliLogits { logits }
    }
}

pub fn build_blr(spec: &ModelSpec, train: &BlrData) -> Model {
    let h = &spec.hyperparams;
    let n = train.len();
    let k = train.x.ncols();
    build_model(vec![
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
            &["alpha", "beta", "x"],
            Support::Categorical(2),
            LogitLikelihood,
            Value::IntVec(train.y.clone()),
        ),
    ])
    .expect("the logistic regression definition is well-formed")
}

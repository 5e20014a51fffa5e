//! Log-densities and samplers for every distribution the benchmark models
//! and the proposal families require.
//!
//! Log-densities are fully normalized (constants included) because the MH
//! ratio mixes asymmetric proposal families. They are written against
//! [`Scalar`] so the same code scores plain values and propagates
//! second-order duals. Values outside the support score `-inf`, which the
//! engine treats as an automatic reject; that is distinct from parameter
//! errors, which are reported as [`DistError`].

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::Distribution as RandDistribution;
use thiserror::Error;

use crate::autodiff::{special, Scalar};
use crate::linalg::{LinalgError, Matrix, SymmetricMatrix, Vector};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("invalid distribution parameter: {0}")]
    InvalidParameter(String),
    #[error("value outside the distribution support")]
    OutOfSupport,
}

/// Declared support of a random variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    RealVector(usize),
    PositiveReal,
    Simplex(usize),
    Categorical(usize),
    NonNegativeInteger,
}

impl Support {
    /// Dimension of the coordinate block a sampler updates.
    pub fn block_dim(&self) -> usize {
        match self {
            Support::RealVector(d) => *d,
            Support::PositiveReal => 1,
            Support::Simplex(k) => *k,
            Support::Categorical(_) | Support::NonNegativeInteger => 1,
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        match (self, v) {
            (Support::RealVector(1), Value::Real(x)) => x.is_finite(),
            (Support::RealVector(d), Value::RealVec(x)) => {
                x.len() == *d && x.iter().all(|e| e.is_finite())
            }
            (Support::RealVector(d), Value::RealMat(x)) => {
                x.len() == *d && x.iter().all(|e| e.is_finite())
            }
            (Support::PositiveReal, Value::Real(x)) => x.is_finite() && *x > 0.0,
            (Support::Simplex(k), Value::RealVec(x)) => {
                x.len() == *k
                    && x.iter().all(|e| e.is_finite() && *e > 0.0)
                    && (x.sum() - 1.0).abs() <= 1e-9
            }
            (Support::Categorical(c), Value::Int(x)) => *x >= 0 && (*x as usize) < *c,
            (Support::Categorical(c), Value::IntVec(xs)) => {
                xs.iter().all(|x| *x >= 0 && (*x as usize) < *c)
            }
            (Support::NonNegativeInteger, Value::Int(x)) => *x >= 0,
            (Support::NonNegativeInteger, Value::IntVec(xs)) => xs.iter().all(|x| *x >= 0),
            _ => false,
        }
    }
}

/// A concrete assignment for one node.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    RealVec(Vector),
    RealMat(Matrix),
    Int(i64),
    IntVec(Vec<i64>),
}

impl Value {
    pub fn as_real(&self) -> f64 {
        match self {
            Value::Real(x) => *x,
            _ => panic!("expected a scalar value"),
        }
    }

    pub fn as_real_vec(&self) -> &Vector {
        match self {
            Value::RealVec(x) => x,
            _ => panic!("expected a real vector value"),
        }
    }

    pub fn as_int(&self) -> i64 {
        match self {
            Value::Int(x) => *x,
            _ => panic!("expected an integer value"),
        }
    }

    /// Real coordinates of the value as a flat slice-backed vector; used to
    /// seed derivative blocks and to serialize samples.
    pub fn coords(&self) -> Vec<f64> {
        match self {
            Value::Real(x) => vec![*x],
            Value::RealVec(x) => x.iter().copied().collect(),
            Value::RealMat(x) => x.iter().copied().collect(),
            Value::Int(x) => vec![*x as f64],
            Value::IntVec(xs) => xs.iter().map(|&x| x as f64).collect(),
        }
    }
}

/// Either a fixed stored value or the live coordinates of the block being
/// differentiated.
#[derive(Debug, Clone, Copy)]
pub enum ValueRef<'a, S: Scalar> {
    Fixed(&'a Value),
    Active(&'a [S]),
}

impl<'a, S: Scalar> ValueRef<'a, S> {
    fn scalar(&self) -> Option<S> {
        match self {
            ValueRef::Fixed(Value::Real(x)) => Some(S::constant(*x)),
            ValueRef::Active(xs) if xs.len() == 1 => Some(xs[0].clone()),
            _ => None,
        }
    }

    // The panicking accessors below are for model builders, where a type
    // mismatch is a bug in the model definition rather than a runtime
    // condition.

    /// Scalar parent (stored real or a one-dimensional active block).
    pub fn real(&self) -> S {
        self.scalar().expect("expected a scalar parent value")
    }

    /// Element of a real-vector parent.
    pub fn real_at(&self, i: usize) -> S {
        match self {
            ValueRef::Fixed(Value::RealVec(xs)) => S::constant(xs[i]),
            ValueRef::Active(xs) => xs[i].clone(),
            _ => panic!("expected a real vector parent value"),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ValueRef::Fixed(Value::Real(_)) | ValueRef::Fixed(Value::Int(_)) => 1,
            ValueRef::Fixed(Value::RealVec(xs)) => xs.len(),
            ValueRef::Fixed(Value::RealMat(xs)) => xs.len(),
            ValueRef::Fixed(Value::IntVec(xs)) => xs.len(),
            ValueRef::Active(xs) => xs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whole real-vector parent as scalars.
    pub fn real_vec(&self) -> Vec<S> {
        match self {
            ValueRef::Fixed(Value::RealVec(xs)) => xs.iter().map(|&x| S::constant(x)).collect(),
            ValueRef::Active(xs) => xs.to_vec(),
            _ => panic!("expected a real vector parent value"),
        }
    }

    /// Integer-valued parent (never part of an active block).
    pub fn int(&self) -> i64 {
        match self {
            ValueRef::Fixed(Value::Int(x)) => *x,
            _ => panic!("expected an integer parent value"),
        }
    }

    /// Matrix-valued observed parent (covariate tables).
    pub fn matrix(&self) -> &'a Matrix {
        match self {
            ValueRef::Fixed(Value::RealMat(x)) => x,
            _ => panic!("expected a matrix parent value"),
        }
    }
}

/// Shape carried by iid product distributions so sampling can rebuild the
/// right container.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IidShape {
    Vec(usize),
    Mat(usize, usize),
}

impl IidShape {
    pub fn len(&self) -> usize {
        match self {
            IidShape::Vec(n) => *n,
            IidShape::Mat(r, c) => r * c,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Parametric families. Scalar parameters have type `S` so distributions
/// built from an active parent carry derivative information.
#[derive(Debug, Clone)]
pub enum Distribution<S: Scalar> {
    Normal { mean: S, sd: S },
    NormalIid { mean: S, sd: S, shape: IidShape },
    Gamma { shape: S, rate: S },
    Exponential { mean: S },
    StudentT { dof: S, loc: S, scale: S },
    StudentTIid { dof: S, locs: Vec<S>, scale: S },
    Bernoulli { p: S },
    BernoulliLogits { logits: Vec<S> },
    Poisson { rate: S },
    Categorical { probs: Vec<S> },
    CategoricalRows { rows: Vec<Vec<S>> },
    Dirichlet { conc: Vec<S> },
}

fn neg_inf<S: Scalar>() -> S {
    S::constant(f64::NEG_INFINITY)
}

fn normal_lp<S: Scalar>(x: S, mean: &S, sd: &S) -> S {
    let z = (x - mean.clone()) / sd.clone();
    -sd.ln() - S::constant(0.5 * LN_2PI) - z.powi(2) * 0.5
}

fn student_t_const<S: Scalar>(dof: &S, scale: &S) -> S {
    let half = dof.clone() * 0.5;
    (half.clone() + 0.5).ln_gamma()
        - half.ln_gamma()
        - (dof.clone() * PI).ln() * 0.5
        - scale.ln()
}

fn student_t_kernel<S: Scalar>(x: S, dof: &S, loc: &S, scale: &S) -> S {
    let z = (x - loc.clone()) / scale.clone();
    -(dof.clone() + 1.0) * 0.5 * (z.powi(2) / dof.clone()).ln_1p()
}

impl<S: Scalar> Distribution<S> {
    /// Fully normalized log-density of `x`.
    pub fn log_density(&self, x: ValueRef<'_, S>) -> S {
        match self {
            Distribution::Normal { mean, sd } => match x.scalar() {
                Some(v) => normal_lp(v, mean, sd),
                None => neg_inf(),
            },
            Distribution::NormalIid { mean, sd, shape } => match x {
                ValueRef::Active(xs) if xs.len() == shape.len() => {
                    let mut acc = S::constant(0.0);
                    for v in xs {
                        acc = acc + normal_lp(v.clone(), mean, sd);
                    }
                    acc
                }
                ValueRef::Fixed(Value::RealVec(xs)) if xs.len() == shape.len() => {
                    self.iid_normal_fixed(xs.iter().copied(), mean, sd)
                }
                ValueRef::Fixed(Value::RealMat(xs)) if xs.len() == shape.len() => {
                    self.iid_normal_fixed(xs.iter().copied(), mean, sd)
                }
                _ => neg_inf(),
            },
            Distribution::Gamma { shape, rate } => match x.scalar() {
                Some(v) if v.value() > 0.0 => {
                    shape.clone() * rate.ln() - shape.ln_gamma()
                        + (shape.clone() - 1.0) * v.ln()
                        - rate.clone() * v
                }
                _ => neg_inf(),
            },
            Distribution::Exponential { mean } => match x.scalar() {
                Some(v) if v.value() >= 0.0 => -mean.ln() - v / mean.clone(),
                _ => neg_inf(),
            },
            Distribution::StudentT { dof, loc, scale } => match x.scalar() {
                Some(v) => student_t_const(dof, scale) + student_t_kernel(v, dof, loc, scale),
                None => neg_inf(),
            },
            Distribution::StudentTIid { dof, locs, scale } => match x {
                ValueRef::Fixed(Value::RealVec(ys)) if ys.len() == locs.len() => {
                    let c = student_t_const(dof, scale);
                    let mut acc = c * locs.len() as f64;
                    for (y, loc) in ys.iter().zip(locs) {
                        acc = acc + student_t_kernel(S::constant(*y), dof, loc, scale);
                    }
                    acc
                }
                _ => neg_inf(),
            },
            Distribution::Bernoulli { p } => match x {
                ValueRef::Fixed(Value::Int(1)) => p.ln(),
                ValueRef::Fixed(Value::Int(0)) => (-p.clone()).ln_1p(),
                _ => neg_inf(),
            },
            Distribution::BernoulliLogits { logits } => match x {
                ValueRef::Fixed(Value::IntVec(ys)) if ys.len() == logits.len() => {
                    let mut acc = S::constant(0.0);
                    for (y, m) in ys.iter().zip(logits) {
                        if *y != 0 && *y != 1 {
                            return neg_inf();
                        }
                        let term = m.clone() * (*y as f64) - m.ln_1p_exp();
                        acc = acc + term;
                    }
                    acc
                }
                _ => neg_inf(),
            },
            Distribution::Poisson { rate } => match x {
                ValueRef::Fixed(Value::Int(k)) if *k >= 0 => {
                    rate.ln() * (*k as f64)
                        - rate.clone()
                        - S::constant(special::ln_gamma(*k as f64 + 1.0))
                }
                _ => neg_inf(),
            },
            Distribution::Categorical { probs } => match x {
                ValueRef::Fixed(Value::Int(k)) if *k >= 0 && (*k as usize) < probs.len() => {
                    probs[*k as usize].ln()
                }
                _ => neg_inf(),
            },
            Distribution::CategoricalRows { rows } => match x {
                ValueRef::Fixed(Value::IntVec(ys)) if ys.len() == rows.len() => {
                    let mut acc = S::constant(0.0);
                    for (y, row) in ys.iter().zip(rows) {
                        if *y < 0 || (*y as usize) >= row.len() {
                            return neg_inf();
                        }
                        acc = acc + row[*y as usize].ln();
                    }
                    acc
                }
                _ => neg_inf(),
            },
            Distribution::Dirichlet { conc } => {
                let k = conc.len();
                let mut total = S::constant(0.0);
                let mut norm = S::constant(0.0);
                for a in conc {
                    total = total + a.clone();
                    norm = norm - a.ln_gamma();
                }
                norm = norm + total.ln_gamma();
                match x {
                    ValueRef::Active(xs) if xs.len() == k => {
                        let mut acc = norm;
                        for (xi, a) in xs.iter().zip(conc) {
                            acc = acc + (a.clone() - 1.0) * xi.ln();
                        }
                        acc
                    }
                    ValueRef::Fixed(Value::RealVec(xs)) if xs.len() == k => {
                        if xs.iter().any(|v| *v <= 0.0) || (xs.sum() - 1.0).abs() > 1e-9 {
                            return neg_inf();
                        }
                        let mut acc = norm;
                        for (xi, a) in xs.iter().zip(conc) {
                            acc = acc + (a.clone() - 1.0) * xi.ln();
                        }
                        acc
                    }
                    _ => neg_inf(),
                }
            }
        }
    }

    fn iid_normal_fixed(&self, xs: impl Iterator<Item = f64>, mean: &S, sd: &S) -> S {
        let mut acc = S::constant(0.0);
        let mut n = 0usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for v in xs {
            n += 1;
            sum += v;
            sumsq += v * v;
        }
        // sum_i logN(x_i; m, s) = -n ln s - n/2 ln 2pi
        //   - (sumsq - 2 m sum + n m^2) / (2 s^2)
        let quad = (mean.powi(2) * n as f64 - mean.clone() * (2.0 * sum) + sumsq)
            / (sd.powi(2) * 2.0);
        acc = acc - sd.ln() * n as f64 - S::constant(0.5 * LN_2PI * n as f64) - quad;
        acc
    }

    /// Support tag implied by the family (element-wise for iid products).
    pub fn support(&self) -> Support {
        match self {
            Distribution::Normal { .. } | Distribution::StudentT { .. } => Support::RealVector(1),
            Distribution::NormalIid { shape, .. } => Support::RealVector(shape.len()),
            Distribution::StudentTIid { locs, .. } => Support::RealVector(locs.len()),
            Distribution::Gamma { .. } | Distribution::Exponential { .. } => Support::PositiveReal,
            Distribution::Bernoulli { .. } | Distribution::BernoulliLogits { .. } => {
                Support::Categorical(2)
            }
            Distribution::Poisson { .. } => Support::NonNegativeInteger,
            Distribution::Categorical { probs } => Support::Categorical(probs.len()),
            Distribution::CategoricalRows { rows } => {
                Support::Categorical(rows.first().map_or(0, Vec::len))
            }
            Distribution::Dirichlet { conc } => Support::Simplex(conc.len()),
        }
    }
}

impl Distribution<f64> {
    pub fn validate(&self) -> Result<(), DistError> {
        let bad = |msg: &str| Err(DistError::InvalidParameter(msg.to_string()));
        match self {
            Distribution::Normal { sd, .. } | Distribution::NormalIid { sd, .. } => {
                if *sd <= 0.0 || !sd.is_finite() {
                    return bad("normal sd must be positive");
                }
            }
            Distribution::Gamma { shape, rate } => {
                if *shape <= 0.0 || *rate <= 0.0 {
                    return bad("gamma shape and rate must be positive");
                }
            }
            Distribution::Exponential { mean } => {
                if *mean <= 0.0 {
                    return bad("exponential mean must be positive");
                }
            }
            Distribution::StudentT { dof, scale, .. }
            | Distribution::StudentTIid { dof, scale, .. } => {
                if *dof <= 0.0 || *scale <= 0.0 {
                    return bad("student-t dof and scale must be positive");
                }
            }
            Distribution::Bernoulli { p } => {
                if !(0.0..=1.0).contains(p) {
                    return bad("bernoulli probability must lie in [0, 1]");
                }
            }
            Distribution::BernoulliLogits { logits } => {
                if logits.iter().any(|m| !m.is_finite()) {
                    return bad("bernoulli logits must be finite");
                }
            }
            Distribution::Poisson { rate } => {
                if *rate <= 0.0 {
                    return bad("poisson rate must be positive");
                }
            }
            Distribution::Categorical { probs } => {
                if probs.iter().any(|p| *p < 0.0) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9
                {
                    return bad("categorical probabilities must be nonnegative and sum to 1");
                }
            }
            Distribution::CategoricalRows { rows } => {
                for row in rows {
                    if row.iter().any(|p| *p < 0.0)
                        || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9
                    {
                        return bad("categorical probabilities must be nonnegative and sum to 1");
                    }
                }
            }
            Distribution::Dirichlet { conc } => {
                if conc.len() < 2 || conc.iter().any(|a| *a <= 0.0) {
                    return bad("dirichlet needs K >= 2 positive concentrations");
                }
            }
        }
        Ok(())
    }

    /// Lift constants into another scalar type.
    pub fn lift<S: Scalar>(&self) -> Distribution<S> {
        let c = S::constant;
        match self {
            Distribution::Normal { mean, sd } => Distribution::Normal {
                mean: c(*mean),
                sd: c(*sd),
            },
            Distribution::NormalIid { mean, sd, shape } => Distribution::NormalIid {
                mean: c(*mean),
                sd: c(*sd),
                shape: *shape,
            },
            Distribution::Gamma { shape, rate } => Distribution::Gamma {
                shape: c(*shape),
                rate: c(*rate),
            },
            Distribution::Exponential { mean } => Distribution::Exponential { mean: c(*mean) },
            Distribution::StudentT { dof, loc, scale } => Distribution::StudentT {
                dof: c(*dof),
                loc: c(*loc),
                scale: c(*scale),
            },
            Distribution::StudentTIid { dof, locs, scale } => Distribution::StudentTIid {
                dof: c(*dof),
                locs: locs.iter().map(|v| c(*v)).collect(),
                scale: c(*scale),
            },
            Distribution::Bernoulli { p } => Distribution::Bernoulli { p: c(*p) },
            Distribution::BernoulliLogits { logits } => Distribution::BernoulliLogits {
                logits: logits.iter().map(|v| c(*v)).collect(),
            },
            Distribution::Poisson { rate } => Distribution::Poisson { rate: c(*rate) },
            Distribution::Categorical { probs } => Distribution::Categorical {
                probs: probs.iter().map(|v| c(*v)).collect(),
            },
            Distribution::CategoricalRows { rows } => Distribution::CategoricalRows {
                rows: rows
                    .iter()
                    .map(|row| row.iter().map(|v| c(*v)).collect())
                    .collect(),
            },
            Distribution::Dirichlet { conc } => Distribution::Dirichlet {
                conc: conc.iter().map(|v| c(*v)).collect(),
            },
        }
    }

    /// Draw one value. Reproducible given the rng state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Value, DistError> {
        self.validate()?;
        let v = match self {
            Distribution::Normal { mean, sd } => Value::Real(draw_normal(*mean, *sd, rng)),
            Distribution::NormalIid { mean, sd, shape } => match shape {
                IidShape::Vec(n) => Value::RealVec(Vector::from_iterator(
                    *n,
                    (0..*n).map(|_| draw_normal(*mean, *sd, rng)),
                )),
                IidShape::Mat(r, c) => Value::RealMat(Matrix::from_fn(*r, *c, |_, _| {
                    draw_normal(*mean, *sd, rng)
                })),
            },
            Distribution::Gamma { shape, rate } => Value::Real(draw_gamma(*shape, *rate, rng)),
            Distribution::Exponential { mean } => {
                let d = rand_distr::Exp::new(1.0 / mean).expect("validated");
                Value::Real(d.sample(rng))
            }
            Distribution::StudentT { dof, loc, scale } => {
                Value::Real(draw_student_t(*dof, *loc, *scale, rng))
            }
            Distribution::StudentTIid { dof, locs, scale } => Value::RealVec(
                Vector::from_iterator(
                    locs.len(),
                    locs.iter().map(|loc| draw_student_t(*dof, *loc, *scale, rng)),
                ),
            ),
            Distribution::Bernoulli { p } => Value::Int(i64::from(rng.random::<f64>() < *p)),
            Distribution::BernoulliLogits { logits } => Value::IntVec(
                logits
                    .iter()
                    .map(|m| {
                        let p = 1.0 / (1.0 + (-m).exp());
                        i64::from(rng.random::<f64>() < p)
                    })
                    .collect(),
            ),
            Distribution::Poisson { rate } => {
                let d = rand_distr::Poisson::new(*rate)
                    .map_err(|e| DistError::InvalidParameter(e.to_string()))?;
                Value::Int(d.sample(rng) as i64)
            }
            Distribution::Categorical { probs } => Value::Int(draw_categorical(probs, rng)),
            Distribution::CategoricalRows { rows } => Value::IntVec(
                rows.iter().map(|row| draw_categorical(row, rng)).collect(),
            ),
            Distribution::Dirichlet { conc } => Value::RealVec(draw_dirichlet(conc, rng)),
        };
        Ok(v)
    }
}

fn draw_normal<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    let z: f64 = rand_distr::StandardNormal.sample(rng);
    mean + sd * z
}

fn draw_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let d = rand_distr::Gamma::new(shape, 1.0 / rate).expect("validated gamma parameters");
    d.sample(rng)
}

fn draw_student_t<R: Rng + ?Sized>(dof: f64, loc: f64, scale: f64, rng: &mut R) -> f64 {
    let d = rand_distr::StudentT::new(dof).expect("validated dof");
    loc + scale * d.sample(rng)
}

fn draw_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> i64 {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (k, p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return k as i64;
        }
    }
    probs.len() as i64 - 1
}

/// Gamma-normalization construction; coordinates are strictly positive and
/// sum to one exactly up to the final divisions.
pub fn draw_dirichlet<R: Rng + ?Sized>(conc: &[f64], rng: &mut R) -> Vector {
    loop {
        let draws: Vec<f64> = conc.iter().map(|&a| draw_gamma(a, 1.0, rng)).collect();
        let sum: f64 = draws.iter().sum();
        if sum > 0.0 && draws.iter().all(|&g| g > 0.0) {
            return Vector::from_iterator(conc.len(), draws.iter().map(|&g| g / sum));
        }
    }
}

/// Fisher-Yates prefix: `k` distinct indices drawn uniformly from `0..n`.
pub fn sample_without_replacement<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> Vec<usize> {
    assert!(k <= n, "cannot draw {k} distinct items from {n}");
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

/// `mean + L z` with `L L^T = covariance`.
pub fn sample_mv_normal<R: Rng + ?Sized>(
    mean: &Vector,
    covariance: &SymmetricMatrix,
    rng: &mut R,
) -> Result<Vector, LinalgError> {
    let l = covariance.cholesky()?;
    let z = standard_normal_vector(mean.len(), rng);
    Ok(mean + l * z)
}

/// Multivariate normal sampling from a *precision* factor: draws `z` and
/// solves `L^T w = z` so that `cov(w) = (L L^T)^{-1}`.
pub fn sample_mv_normal_prec<R: Rng + ?Sized>(
    mean: &Vector,
    prec_chol_l: &Matrix,
    rng: &mut R,
) -> Result<Vector, LinalgError> {
    let z = standard_normal_vector(mean.len(), rng);
    let w = prec_chol_l
        .tr_solve_lower_triangular(&z)
        .ok_or(LinalgError::SingularMatrix)?;
    Ok(mean + w)
}

/// Normalized log-density of the multivariate normal given the lower
/// Cholesky factor of its precision matrix.
pub fn mv_normal_log_density_prec(mean: &Vector, prec_chol_l: &Matrix, x: &Vector) -> f64 {
    let d = mean.len() as f64;
    let half_log_det: f64 = prec_chol_l.diagonal().iter().map(|v| v.ln()).sum();
    let t = prec_chol_l.transpose() * (x - mean);
    -0.5 * d * LN_2PI + half_log_det - 0.5 * t.norm_squared()
}

/// Elliptical Cauchy draw `b + L^{-T} z / sqrt(g)` where `L L^T = A` and
/// `g` is chi-square with one degree of freedom.
pub fn sample_mv_cauchy<R: Rng + ?Sized>(
    b: &Vector,
    a: &SymmetricMatrix,
    rng: &mut R,
) -> Result<Vector, LinalgError> {
    let l = a.cholesky()?;
    let z = standard_normal_vector(b.len(), rng);
    let w = l
        .tr_solve_lower_triangular(&z)
        .ok_or(LinalgError::SingularMatrix)?;
    let g: f64 = {
        let n: f64 = rand_distr::StandardNormal.sample(rng);
        n * n
    };
    Ok(b + w / g.sqrt())
}

/// Normalized log-density of the elliptical Cauchy (multivariate t with one
/// degree of freedom) with quadratic-form matrix `A = L L^T`.
pub fn mv_cauchy_log_density(b: &Vector, a_chol_l: &Matrix, x: &Vector) -> f64 {
    let d = b.len() as f64;
    let half_log_det: f64 = a_chol_l.diagonal().iter().map(|v| v.ln()).sum();
    let t = a_chol_l.transpose() * (x - b);
    special::ln_gamma((1.0 + d) / 2.0) - special::ln_gamma(0.5) - 0.5 * d * PI.ln()
        + half_log_det
        - (1.0 + d) / 2.0 * t.norm_squared().ln_1p()
}

/// Standard normal CDF, accurate to ~1e-15 (Hart-style rational fits).
pub fn normal_cdf(z: f64) -> f64 {
    let x = z.abs();
    let cum = if x > 37.0 {
        0.0
    } else {
        let e = (-x * x / 2.0).exp();
        if x < 7.071_067_811_865_475 {
            let mut num = 3.526_249_659_989_11e-2 * x + 0.700_383_064_443_688;
            num = num * x + 6.373_962_203_531_65;
            num = num * x + 33.912_866_078_383;
            num = num * x + 112.079_291_497_871;
            num = num * x + 221.213_596_169_931;
            num = num * x + 220.206_867_912_376;
            let mut den = 8.838_834_764_831_84e-2 * x + 1.755_667_163_182_64;
            den = den * x + 16.064_177_579_207;
            den = den * x + 86.780_732_202_946_1;
            den = den * x + 296.564_248_779_674;
            den = den * x + 637.333_633_378_831;
            den = den * x + 793.826_512_519_948;
            den = den * x + 440.413_735_824_752;
            e * num / den
        } else {
            let mut b = x + 0.65;
            b = x + 4.0 / b;
            b = x + 3.0 / b;
            b = x + 2.0 / b;
            b = x + 1.0 / b;
            e / (b * 2.506_628_274_631_000_5)
        }
    };
    if z > 0.0 {
        1.0 - cum
    } else {
        cum
    }
}

fn standard_normal_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| rand_distr::StandardNormal.sample(rng)))
}

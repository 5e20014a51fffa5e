//! Exact first and second derivatives of scalar log-densities with respect
//! to one coordinate block.
//!
//! [`Dual`] is a second-order forward-mode number: it carries a value, a
//! gradient of length `d` (the active block dimension) and a dense symmetric
//! `d x d` Hessian. Propagation is exact to floating-point rounding — no
//! finite differencing is involved anywhere. Gradient and Hessian channels
//! are stored as `Option` so constants cost nothing and affine expressions
//! never materialize a Hessian.
//!
//! Log-densities are written once against the [`Scalar`] trait and evaluated
//! either on plain `f64` (scoring) or on [`Dual`] (derivatives). The Hessian
//! block is only ever the one of the active coordinate block; cross-block
//! curvature does not exist in this API.

pub mod special;

use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    /// A derivative or value came out NaN/Inf, which signals evaluating the
    /// function outside its support.
    #[error("non-finite derivative or value at the evaluation point")]
    NonFiniteDerivative,
    /// The function is built on something the differentiation engine does
    /// not register (e.g. the value of a discrete variable).
    #[error("unsupported primitive for differentiation: {0}")]
    UnsupportedPrimitive(&'static str),
}

/// Detached derivative bundle handed to the proposers.
#[derive(Debug, Clone, PartialEq)]
pub struct GradHess {
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl GradHess {
    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn is_finite(&self) -> bool {
        self.grad.iter().all(|v| v.is_finite()) && self.hess.iter().all(|v| v.is_finite())
    }
}

/// Numeric scalar with the primitive set the log-densities need.
///
/// Implemented for `f64` (plain evaluation) and [`Dual`] (derivatives).
pub trait Scalar:
    Clone
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + Sized
{
    fn constant(c: f64) -> Self;
    fn value(&self) -> f64;
    fn ln(&self) -> Self;
    fn exp(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn recip(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn ln_1p(&self) -> Self;
    fn ln_gamma(&self) -> Self;
    /// ln(1 + e^x) without overflow for large |x|.
    fn ln_1p_exp(&self) -> Self;

    /// Sum of `c_i * x_i` over (constant, scalar) pairs. The `Dual`
    /// implementation accumulates the channels in place, which keeps the
    /// inner loops of vectorized likelihoods allocation-free.
    fn weighted_sum<'a>(terms: impl IntoIterator<Item = (f64, &'a Self)>) -> Self
    where
        Self: 'a;
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn recip(&self) -> Self {
        1.0 / *self
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn ln_1p(&self) -> Self {
        f64::ln_1p(*self)
    }
    fn ln_gamma(&self) -> Self {
        special::ln_gamma(*self)
    }
    fn ln_1p_exp(&self) -> Self {
        softplus(*self)
    }
    fn weighted_sum<'a>(terms: impl IntoIterator<Item = (f64, &'a Self)>) -> Self {
        terms.into_iter().map(|(c, x)| c * x).sum()
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Second-order dual number over one coordinate block.
///
/// `grad == None` and `hess == None` mean "identically zero"; constants and
/// linear forms stay cheap this way. All Hessian updates fill the upper
/// triangle and mirror it, so the stored matrix is symmetric exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual {
    val: f64,
    grad: Option<DVector<f64>>,
    hess: Option<DMatrix<f64>>,
}

impl Dual {
    pub fn constant(c: f64) -> Self {
        Dual {
            val: c,
            grad: None,
            hess: None,
        }
    }

    /// Seed the coordinates of a d-dimensional block.
    pub fn seed_block(x: &[f64]) -> Vec<Dual> {
        let d = x.len();
        x.iter()
            .enumerate()
            .map(|(i, &xi)| {
                let mut g = DVector::zeros(d);
                g[i] = 1.0;
                Dual {
                    val: xi,
                    grad: Some(g),
                    hess: None,
                }
            })
            .collect()
    }

    pub fn val(&self) -> f64 {
        self.val
    }

    /// Chain rule for a unary map with value `f`, first derivative `fp` and
    /// second derivative `fpp` at `self.val`.
    fn chain(&self, f: f64, fp: f64, fpp: f64) -> Dual {
        let grad = self.grad.as_ref().map(|g| g * fp);
        let curved = match (&self.grad, fpp != 0.0) {
            (Some(g), true) => Some(outer_self(g, fpp)),
            _ => None,
        };
        let propagated = self.hess.as_ref().map(|h| h * fp);
        Dual {
            val: f,
            grad,
            hess: add_opt_mat(propagated, curved),
        }
    }
}

fn add_opt_vec(a: Option<DVector<f64>>, b: Option<DVector<f64>>) -> Option<DVector<f64>> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x + y),
        (Some(x), None) | (None, Some(x)) => Some(x),
        (None, None) => None,
    }
}

fn add_opt_mat(a: Option<DMatrix<f64>>, b: Option<DMatrix<f64>>) -> Option<DMatrix<f64>> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x + y),
        (Some(x), None) | (None, Some(x)) => Some(x),
        (None, None) => None,
    }
}

/// c * g g^T, upper triangle mirrored.
fn outer_self(g: &DVector<f64>, c: f64) -> DMatrix<f64> {
    let d = g.len();
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = c * g[i] * g[j];
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// u v^T + v u^T, upper triangle mirrored.
fn outer_sym(u: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    let d = u.len();
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let x = u[i] * v[j] + v[i] * u[j];
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    m
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        Dual {
            val: self.val + rhs.val,
            grad: add_opt_vec(self.grad, rhs.grad),
            hess: add_opt_mat(self.hess, rhs.hess),
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        self + (-rhs)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            val: -self.val,
            grad: self.grad.map(|g| -g),
            hess: self.hess.map(|h| -h),
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        // (fg)'' = f'' g + 2 sym(f' g') + f g''
        let cross = match (&self.grad, &rhs.grad) {
            (Some(a), Some(b)) => Some(outer_sym(a, b)),
            _ => None,
        };
        let grad = add_opt_vec(
            self.grad.as_ref().map(|g| g * rhs.val),
            rhs.grad.as_ref().map(|g| g * self.val),
        );
        let hess = add_opt_mat(
            add_opt_mat(
                self.hess.as_ref().map(|h| h * rhs.val),
                rhs.hess.as_ref().map(|h| h * self.val),
            ),
            cross,
        );
        Dual {
            val: self.val * rhs.val,
            grad,
            hess,
        }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, rhs: Dual) -> Dual {
        let inv = rhs.recip();
        self * inv
    }
}

impl Add<f64> for Dual {
    type Output = Dual;
    fn add(mut self, rhs: f64) -> Dual {
        self.val += rhs;
        self
    }
}

impl Sub<f64> for Dual {
    type Output = Dual;
    fn sub(mut self, rhs: f64) -> Dual {
        self.val -= rhs;
        self
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, rhs: f64) -> Dual {
        Dual {
            val: self.val * rhs,
            grad: self.grad.map(|g| g * rhs),
            hess: self.hess.map(|h| h * rhs),
        }
    }
}

impl Div<f64> for Dual {
    type Output = Dual;
    fn div(self, rhs: f64) -> Dual {
        self * (1.0 / rhs)
    }
}

impl Scalar for Dual {
    fn constant(c: f64) -> Self {
        Dual::constant(c)
    }

    fn value(&self) -> f64 {
        self.val
    }

    fn ln(&self) -> Self {
        let inv = 1.0 / self.val;
        self.chain(self.val.ln(), inv, -inv * inv)
    }

    fn exp(&self) -> Self {
        let e = self.val.exp();
        self.chain(e, e, e)
    }

    fn sqrt(&self) -> Self {
        let s = self.val.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.val))
    }

    fn recip(&self) -> Self {
        let inv = 1.0 / self.val;
        let inv2 = inv * inv;
        self.chain(inv, -inv2, 2.0 * inv2 * inv)
    }

    fn powi(&self, n: i32) -> Self {
        let v = self.val;
        self.chain(
            v.powi(n),
            f64::from(n) * v.powi(n - 1),
            f64::from(n) * f64::from(n - 1) * v.powi(n - 2),
        )
    }

    fn ln_1p(&self) -> Self {
        let inv = 1.0 / (1.0 + self.val);
        self.chain(self.val.ln_1p(), inv, -inv * inv)
    }

    fn ln_gamma(&self) -> Self {
        self.chain(
            special::ln_gamma(self.val),
            special::digamma(self.val),
            special::trigamma(self.val),
        )
    }

    fn ln_1p_exp(&self) -> Self {
        let s = sigmoid(self.val);
        self.chain(softplus(self.val), s, s * (1.0 - s))
    }

    fn weighted_sum<'a>(terms: impl IntoIterator<Item = (f64, &'a Self)>) -> Self {
        let mut val = 0.0;
        let mut grad: Option<DVector<f64>> = None;
        let mut hess: Option<DMatrix<f64>> = None;
        for (c, x) in terms {
            val += c * x.val;
            if let Some(g) = &x.grad {
                match &mut grad {
                    Some(acc) => acc.axpy(c, g, 1.0),
                    None => grad = Some(g * c),
                }
            }
            if let Some(h) = &x.hess {
                match &mut hess {
                    Some(acc) => *acc += h * c,
                    None => hess = Some(h * c),
                }
            }
        }
        Dual { val, grad, hess }
    }
}

/// A scalar-valued function of a d-vector, evaluable both on plain values
/// and on second-order duals. The two entry points are expected to run the
/// same code over [`Scalar`]; they are split so implementors stay object
/// safe.
pub trait ScalarFn {
    fn eval_f64(&self, x: &[f64]) -> f64;
    fn eval_dual(&self, x: &[Dual]) -> Dual;
}

/// Evaluate `f` at `x` and return the exact value, gradient and Hessian of
/// the active block.
pub fn evaluate_with_derivatives<F: ScalarFn>(
    f: &F,
    x: &[f64],
) -> Result<(f64, GradHess), AutodiffError> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(AutodiffError::NonFiniteDerivative);
    }
    let seeds = Dual::seed_block(x);
    let out = f.eval_dual(&seeds);
    finish(x.len(), out)
}

fn finish(d: usize, out: Dual) -> Result<(f64, GradHess), AutodiffError> {
    let grad = out.grad.unwrap_or_else(|| DVector::zeros(d));
    let hess = out.hess.unwrap_or_else(|| DMatrix::zeros(d, d));
    if grad.len() != d || hess.nrows() != d || hess.ncols() != d {
        return Err(AutodiffError::UnsupportedPrimitive(
            "derivative channels do not match the active block dimension",
        ));
    }
    let gh = GradHess { grad, hess };
    if !out.val.is_finite() || !gh.is_finite() {
        return Err(AutodiffError::NonFiniteDerivative);
    }
    Ok((out.val, gh))
}

/// Same as [`evaluate_with_derivatives`] but for a plain closure over duals.
pub fn derivatives_of(
    f: impl Fn(&[Dual]) -> Dual,
    x: &[f64],
) -> Result<(f64, GradHess), AutodiffError> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(AutodiffError::NonFiniteDerivative);
    }
    let seeds = Dual::seed_block(x);
    finish(x.len(), f(&seeds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fd_grad_hess(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> (DVector<f64>, DMatrix<f64>) {
        let d = x.len();
        let mut grad = DVector::zeros(d);
        let mut hess = DMatrix::zeros(d, d);
        let f0 = f(x);
        let mut xp = x.to_vec();
        for i in 0..d {
            xp[i] = x[i] + h;
            let fp = f(&xp);
            xp[i] = x[i] - h;
            let fm = f(&xp);
            xp[i] = x[i];
            grad[i] = (fp - fm) / (2.0 * h);
            hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        }
        for i in 0..d {
            for j in (i + 1)..d {
                xp[i] = x[i] + h;
                xp[j] = x[j] + h;
                let fpp = f(&xp);
                xp[j] = x[j] - h;
                let fpm = f(&xp);
                xp[i] = x[i] - h;
                let fmm = f(&xp);
                xp[j] = x[j] + h;
                let fmp = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        (grad, hess)
    }

    #[test]
    fn standard_normal_log_kernel() {
        // f(x) = -x^2/2 at x = 1.5
        let (v, gh) = derivatives_of(|x| -(x[0].clone() * x[0].clone()) / 2.0, &[1.5]).unwrap();
        assert_relative_eq!(v, -1.125, epsilon = 1e-15);
        assert_relative_eq!(gh.grad[0], -1.5, epsilon = 1e-15);
        assert_relative_eq!(gh.hess[(0, 0)], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn bilinear_form() {
        // f(x, y) = x * y at (2, 3)
        let (v, gh) = derivatives_of(|x| x[0].clone() * x[1].clone(), &[2.0, 3.0]).unwrap();
        assert_relative_eq!(v, 6.0, epsilon = 1e-15);
        assert_eq!(gh.grad.as_slice(), &[3.0, 2.0]);
        assert_eq!(gh.hess[(0, 0)], 0.0);
        assert_eq!(gh.hess[(0, 1)], 1.0);
        assert_eq!(gh.hess[(1, 0)], 1.0);
        assert_eq!(gh.hess[(1, 1)], 0.0);
    }

    #[test]
    fn funnel_conditional_matches_finite_differences() {
        // log-density in z with x held fixed:
        // logN(z; 0, 3) + logN(x; 0, e^{z/2})
        let x_fixed = 1.3;
        let f_dual = |z: &[Dual]| {
            let z = &z[0];
            let prior = -(z.clone() * z.clone()) / 18.0;
            let sd = (z.clone() * 0.5).exp();
            let lik = -sd.ln() - (sd.recip() * x_fixed).powi(2) / 2.0;
            prior + lik
        };
        let f_plain = |z: &[f64]| {
            let z = z[0];
            let sd = (0.5 * z).exp();
            -z * z / 18.0 - sd.ln() - (x_fixed / sd).powi(2) / 2.0
        };
        let mut rng_state = 88172645463325252u64;
        let mut next = move || {
            // xorshift; plenty for spreading test points
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state % 1000) as f64 / 250.0 - 2.0
        };
        for _ in 0..20 {
            let z = next();
            let (_, gh) = derivatives_of(f_dual, &[z]).unwrap();
            let (fd_g, fd_h) = fd_grad_hess(f_plain, &[z], 1e-4);
            assert_relative_eq!(gh.grad[0], fd_g[0], max_relative = 1e-6);
            assert_relative_eq!(gh.hess[(0, 0)], fd_h[(0, 0)], max_relative = 1e-6);
        }
    }

    #[test]
    fn non_finite_evaluation_is_an_error() {
        let err = derivatives_of(|x| x[0].ln(), &[-1.0]).unwrap_err();
        assert_eq!(err, AutodiffError::NonFiniteDerivative);
    }

    #[test]
    fn ln_gamma_chain() {
        let f = |x: &[Dual]| (x[0].clone() * 2.0).ln_gamma();
        let plain = |x: &[f64]| special::ln_gamma(2.0 * x[0]);
        let (_, gh) = derivatives_of(f, &[1.7]).unwrap();
        let (fd_g, _) = fd_grad_hess(plain, &[1.7], 1e-5);
        // second differences need a wider step to beat rounding noise
        let (_, fd_h) = fd_grad_hess(plain, &[1.7], 1e-4);
        assert_relative_eq!(gh.grad[0], fd_g[0], max_relative = 1e-7);
        assert_relative_eq!(gh.hess[(0, 0)], fd_h[(0, 0)], max_relative = 1e-5);
    }

    proptest! {
        // Each registered primitive agrees with central finite differences
        // on randomized interior points.
        #[test]
        fn primitives_match_finite_differences(x in 0.05f64..4.0, y in -3.0f64..3.0) {
            let cases: Vec<(Box<dyn Fn(&[Dual]) -> Dual>, Box<dyn Fn(&[f64]) -> f64>)> = vec![
                (Box::new(|v: &[Dual]| v[0].ln()), Box::new(|v: &[f64]| v[0].ln())),
                (Box::new(|v: &[Dual]| v[0].exp()), Box::new(|v: &[f64]| v[0].exp())),
                (Box::new(|v: &[Dual]| v[0].sqrt()), Box::new(|v: &[f64]| v[0].sqrt())),
                (Box::new(|v: &[Dual]| v[0].recip()), Box::new(|v: &[f64]| 1.0 / v[0])),
                (Box::new(|v: &[Dual]| v[0].powi(3)), Box::new(|v: &[f64]| v[0].powi(3))),
                (Box::new(|v: &[Dual]| v[0].ln_1p()), Box::new(|v: &[f64]| v[0].ln_1p())),
                (Box::new(|v: &[Dual]| v[0].ln_gamma()), Box::new(|v: &[f64]| special::ln_gamma(v[0]))),
            ];
            for (fd_fn, plain) in &cases {
                let (_, gh) = derivatives_of(|v: &[Dual]| fd_fn(v), &[x]).unwrap();
                let (g, h) = fd_grad_hess(|v| plain(v), &[x], 1e-5);
                prop_assert!((gh.grad[0] - g[0]).abs() <= 1e-4 * g[0].abs().max(1.0));
                prop_assert!((gh.hess[(0,0)] - h[(0,0)]).abs() <= 1e-3 * h[(0,0)].abs().max(1.0));
            }
            // softplus is fine at any real argument
            let (_, gh) = derivatives_of(|v: &[Dual]| v[0].ln_1p_exp(), &[y]).unwrap();
            let (g, h) = fd_grad_hess(|v| softplus(v[0]), &[y], 1e-5);
            prop_assert!((gh.grad[0] - g[0]).abs() <= 1e-4);
            prop_assert!((gh.hess[(0,0)] - h[(0,0)]).abs() <= 1e-3);
        }

        // Derivatives are linear: deriv(a f + b g) = a deriv(f) + b deriv(g).
        #[test]
        fn linearity(a in -5.0f64..5.0, b in -5.0f64..5.0, x in 0.1f64..3.0, y in 0.1f64..3.0) {
            let f = |v: &[Dual]| v[0].ln() * v[1].clone();
            let g = |v: &[Dual]| (v[0].clone() * v[1].clone()).exp();
            let combo = |v: &[Dual]| f(v) * a + g(v) * b;
            let (_, gh_f) = derivatives_of(f, &[x, y]).unwrap();
            let (_, gh_g) = derivatives_of(g, &[x, y]).unwrap();
            let (_, gh_c) = derivatives_of(combo, &[x, y]).unwrap();
            for i in 0..2 {
                let want = a * gh_f.grad[i] + b * gh_g.grad[i];
                prop_assert!((gh_c.grad[i] - want).abs() <= 1e-12 * want.abs().max(1.0));
                for j in 0..2 {
                    let want = a * gh_f.hess[(i, j)] + b * gh_g.hess[(i, j)];
                    prop_assert!((gh_c.hess[(i, j)] - want).abs() <= 1e-12 * want.abs().max(1.0));
                }
            }
        }

        // The returned Hessian is symmetric identically, not approximately.
        #[test]
        fn hessian_exactly_symmetric(x in 0.1f64..2.0, y in 0.1f64..2.0, z in 0.1f64..2.0) {
            let f = |v: &[Dual]| {
                (v[0].clone() * v[1].clone()).exp() * v[2].sqrt()
                    + v[0].ln() * v[2].clone() / v[1].clone()
            };
            let (_, gh) = derivatives_of(f, &[x, y, z]).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert_eq!(gh.hess[(i, j)], gh.hess[(j, i)]);
                }
            }
        }
    }
}

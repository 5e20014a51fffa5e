//! Dense symmetric linear algebra for the proposers: eigendecomposition,
//! positive-definiteness repair, linear solves and Cholesky factors.
//!
//! Everything here targets the small per-coordinate blocks of single-site
//! updates (a handful of dimensions, a few hundred at most). Explicit matrix
//! inverses are never formed; every `H^{-1} v` expression is a solve.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Condition-number cutoff beyond which a solve reports `SingularMatrix`.
const COND_LIMIT: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("symmetric eigensolver did not converge")]
    NoConvergence,
    #[error("matrix is singular or too ill-conditioned to solve")]
    SingularMatrix,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix entries are not finite")]
    NonFiniteEntries,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// A square matrix symmetrized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    m: Matrix,
}

impl SymmetricMatrix {
    pub fn new(m: Matrix) -> Result<Self, LinalgError> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} is not a nonempty square matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFiniteEntries);
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(SymmetricMatrix { m: sym })
    }

    pub fn from_diagonal(diag: &Vector) -> Self {
        SymmetricMatrix {
            m: Matrix::from_diagonal(diag),
        }
    }

    pub fn identity(dim: usize) -> Self {
        SymmetricMatrix {
            m: Matrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn into_matrix(self) -> Matrix {
        self.m
    }

    /// Eigendecomposition with eigenvalues sorted ascending and the
    /// eigenvector columns permuted to match.
    pub fn eig_sym(&self) -> Result<(Vector, Matrix), LinalgError> {
        let eig = self
            .m
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 500)
            .ok_or(LinalgError::NoConvergence)?;
        let mut idx: Vec<usize> = (0..self.dim()).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = Vector::from_iterator(self.dim(), idx.iter().map(|&i| eig.eigenvalues[i]));
        let mut vectors = Matrix::zeros(self.dim(), self.dim());
        for (col, &i) in idx.iter().enumerate() {
            vectors.set_column(col, &eig.eigenvectors.column(i));
        }
        Ok((values, vectors))
    }

    /// Clamp eigenvalues below `floor` up to `floor` and reconstruct.
    ///
    /// Matrices whose spectrum is already above the floor are returned
    /// unchanged. The check carries a rounding-level slack proportional to
    /// the spectral radius so that repairing an already-repaired matrix is
    /// a bitwise no-op; the output spectrum sits at or within that slack of
    /// the floor.
    pub fn repair_psd(&self, floor: f64) -> Result<SymmetricMatrix, LinalgError> {
        assert!(floor > 0.0, "eigenvalue floor must be positive");
        let (values, vectors) = self.eig_sym()?;
        let spectral = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let slack = 128.0 * f64::EPSILON * spectral.max(floor);
        if values[0] >= floor - slack {
            return Ok(self.clone());
        }
        let clamped = values.map(|v| v.max(floor));
        let rebuilt = &vectors * Matrix::from_diagonal(&clamped) * vectors.transpose();
        SymmetricMatrix::new(rebuilt)
    }

    /// Solve `M x = b` for symmetric `M` (definite or indefinite).
    ///
    /// Uses the eigendecomposition plus one step of iterative refinement;
    /// refuses matrices with condition estimate above 1e12.
    pub fn solve(&self, b: &Vector) -> Result<Vector, LinalgError> {
        if b.len() != self.dim() {
            return Err(LinalgError::DimensionMismatch(format!(
                "rhs length {} vs dimension {}",
                b.len(),
                self.dim()
            )));
        }
        let (values, vectors) = self.eig_sym()?;
        let max_abs = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let min_abs = values.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        if min_abs == 0.0 || max_abs / min_abs > COND_LIMIT {
            return Err(LinalgError::SingularMatrix);
        }
        let apply_inverse = |rhs: &Vector| -> Vector {
            let mut coeffs = vectors.transpose() * rhs;
            for (c, lambda) in coeffs.iter_mut().zip(values.iter()) {
                *c /= *lambda;
            }
            &vectors * coeffs
        };
        let mut x = apply_inverse(b);
        let residual = b - &self.m * &x;
        x += apply_inverse(&residual);
        Ok(x)
    }

    /// Lower-triangular Cholesky factor `L` with `L L^T = M`.
    pub fn cholesky(&self) -> Result<Matrix, LinalgError> {
        nalgebra::Cholesky::new(self.m.clone())
            .map(|c| c.l())
            .ok_or(LinalgError::NotPositiveDefinite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mat2(a: f64, b: f64, c: f64, d: f64) -> Matrix {
        Matrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    #[test]
    fn eig_diagonal() {
        let m = SymmetricMatrix::new(mat2(2.0, 0.0, 0.0, 5.0)).unwrap();
        let (values, vectors) = m.eig_sym().unwrap();
        assert_relative_eq!(values[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(values[1], 5.0, epsilon = 1e-12);
        for col in 0..2 {
            let c = vectors.column(col);
            assert_relative_eq!(c.norm(), 1.0, epsilon = 1e-12);
        }
        assert_relative_eq!(vectors[(0, 0)].abs(), 1.0, epsilon = 1e-10);
        assert_relative_eq!(vectors[(1, 1)].abs(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn eig_exchange_matrix() {
        let m = SymmetricMatrix::new(mat2(0.0, 1.0, 1.0, 0.0)).unwrap();
        let (values, _) = m.eig_sym().unwrap();
        assert_relative_eq!(values[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(values[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn repair_floors_negative_eigenvalue() {
        let m = SymmetricMatrix::new(mat2(1.0, 0.0, 0.0, -2.0)).unwrap();
        let repaired = m.repair_psd(1e-6).unwrap();
        assert_relative_eq!(repaired.as_matrix()[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(repaired.as_matrix()[(1, 1)], 1e-6, epsilon = 1e-18);
        assert_relative_eq!(repaired.as_matrix()[(0, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn repair_keeps_psd_input_untouched() {
        let m = SymmetricMatrix::new(mat2(2.0, 1.0, 1.0, 2.0)).unwrap();
        let repaired = m.repair_psd(1e-6).unwrap();
        assert_eq!(repaired.as_matrix(), m.as_matrix());
    }

    #[test]
    fn solve_scalar_matrix() {
        let m = SymmetricMatrix::new(Matrix::identity(3, 3) * 2.0).unwrap();
        let b = Vector::from_vec(vec![2.0, 4.0, 6.0]);
        let x = m.solve(&b).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(x[2], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn solve_residual_check() {
        let m = SymmetricMatrix::new(mat2(4.0, 1.0, 1.0, 3.0)).unwrap();
        let b = Vector::from_vec(vec![1.0, 2.0]);
        let x = m.solve(&b).unwrap();
        let r = (&b - m.as_matrix() * &x).norm();
        assert!(r <= 1e-8 * b.norm());
    }

    #[test]
    fn solve_singular_is_an_error() {
        let m = SymmetricMatrix::new(mat2(1.0, 1.0, 1.0, 1.0)).unwrap();
        let b = Vector::from_vec(vec![1.0, 0.0]);
        assert_eq!(m.solve(&b).unwrap_err(), LinalgError::SingularMatrix);
    }

    #[test]
    fn cholesky_identity_and_reconstruction() {
        let id = SymmetricMatrix::identity(3);
        let l = id.cholesky().unwrap();
        assert_relative_eq!((&l - Matrix::identity(3, 3)).norm(), 0.0, epsilon = 1e-14);

        let m = SymmetricMatrix::new(mat2(4.0, 2.0, 2.0, 5.0)).unwrap();
        let l = m.cholesky().unwrap();
        let back = &l * l.transpose();
        assert_relative_eq!((back - m.as_matrix()).norm(), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn cholesky_indefinite_is_an_error() {
        let m = SymmetricMatrix::new(mat2(1.0, 2.0, 2.0, 1.0)).unwrap();
        assert_eq!(m.cholesky().unwrap_err(), LinalgError::NotPositiveDefinite);
    }

    fn random_symmetric(dim: usize, entries: &[f64]) -> SymmetricMatrix {
        let m = Matrix::from_fn(dim, dim, |i, j| entries[i * dim + j]);
        SymmetricMatrix::new((&m + m.transpose()) * 0.5).unwrap()
    }

    proptest! {
        #[test]
        fn eig_reconstructs_input(entries in proptest::collection::vec(-10.0f64..10.0, 25)) {
            let m = random_symmetric(5, &entries);
            let (values, vectors) = m.eig_sym().unwrap();
            let back = &vectors * Matrix::from_diagonal(&values) * vectors.transpose();
            let scale = m.as_matrix().amax().max(1.0);
            prop_assert!((back - m.as_matrix()).amax() <= 1e-8 * scale);
            let ortho = (vectors.transpose() * &vectors - Matrix::identity(5, 5)).amax();
            prop_assert!(ortho <= 1e-8);
        }

        #[test]
        fn repair_output_spectrum_is_floored(entries in proptest::collection::vec(-5.0f64..5.0, 16)) {
            let m = random_symmetric(4, &entries);
            let repaired = m.repair_psd(1e-6).unwrap();
            let (values, _) = repaired.eig_sym().unwrap();
            let spectral = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let slack = 256.0 * f64::EPSILON * spectral.max(1e-6);
            prop_assert!(values[0] >= 1e-6 - slack, "min eigenvalue {}", values[0]);
        }

        #[test]
        fn repair_is_idempotent(entries in proptest::collection::vec(-5.0f64..5.0, 16)) {
            let m = random_symmetric(4, &entries);
            let once = m.repair_psd(1e-6).unwrap();
            let twice = once.repair_psd(1e-6).unwrap();
            prop_assert_eq!(once.as_matrix(), twice.as_matrix());
        }

        #[test]
        fn solve_agrees_with_cholesky_solve(entries in proptest::collection::vec(-3.0f64..3.0, 16),
                                            rhs in proptest::collection::vec(-5.0f64..5.0, 4)) {
            // Make a PD matrix from A^T A + I.
            let a = Matrix::from_fn(4, 4, |i, j| entries[i * 4 + j]);
            let pd = SymmetricMatrix::new(a.transpose() * &a + Matrix::identity(4, 4)).unwrap();
            let b = Vector::from_vec(rhs);
            let x = pd.solve(&b).unwrap();
            let chol = nalgebra::Cholesky::new(pd.as_matrix().clone()).unwrap();
            let x_chol = chol.solve(&b);
            prop_assert!((x - x_chol).amax() <= 1e-8 * b.amax().max(1.0));
        }
    }
}

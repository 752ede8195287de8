//! Dense symmetric positive-definite solves with jitter escalation.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative jitter levels tried after the plain factorization fails,
/// as multiples of `tr(K)/n`.
const JITTER_START: f64 = 1e-10;
const JITTER_END: f64 = 1e-4;

/// Cholesky factor of `K + shift·I (+ jitter·I)`.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl SpdFactor {
    /// Factorizes `matrix + shift·I`. When that is not numerically positive
    /// definite, `10⁻¹⁰·tr(K)/n` is added to the diagonal and escalated by
    /// ×10 up to `10⁻⁴·tr(K)/n` before giving up.
    pub fn with_shift(matrix: &DMatrix<f64>, shift: f64) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::input(format!(
                "expected a nonempty square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !shift.is_finite() {
            return Err(Error::input("diagonal shift must be finite"));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("matrix has non-finite entries".into()));
        }
        let mean_diag = matrix.trace() / n as f64;
        let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };

        let mut jitter = 0.0;
        let mut level = JITTER_START;
        loop {
            let mut shifted = matrix.clone();
            for i in 0..n {
                shifted[(i, i)] += shift + jitter;
            }
            if let Some(chol) = Cholesky::new(shifted) {
                return Ok(SpdFactor { chol, jitter });
            }
            if level > JITTER_END * (1.0 + 1e-9) {
                let min_diag = matrix.diagonal().min();
                return Err(Error::Numerical(format!(
                    "matrix of size {n} is not positive definite after jitter {jitter:.3e} \
                     (shift {shift:.3e}, tr/n {mean_diag:.3e}, min diagonal {min_diag:.3e})"
                )));
            }
            jitter = level * scale;
            level *= 10.0;
        }
    }

    pub fn factor(matrix: &DMatrix<f64>) -> Result<Self> {
        Self::with_shift(matrix, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// Extra diagonal that had to be added beyond the requested shift.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    pub fn solve_matrix(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(rhs)
    }

    /// `rhsᵀ A⁻¹ rhs` through one triangular solve.
    pub fn inverse_quadratic_form(&self, rhs: &DVector<f64>) -> f64 {
        let mut w = rhs.clone();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut w);
        w.norm_squared()
    }
}

//! Exact Gaussian process regression and the normalized-loss view of it.
//!
//! With `λ = ν²/n` the minimizer `v* = n(K + nλI)⁻¹k` of the normalized
//! loss reproduces the predictive distribution:
//! `μ = ⟨v*, y⟩/n`, `σ² = k(x*,x*) − ⟨v*, k⟩/n`.

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{cross_kernel, kernel_matrix, KernelSpec};
use crate::linalg::SpdFactor;

/// Kernel plus regularization. Everything downstream runs on `lambda`;
/// `noise_variance` is kept for reporting when the config was built from ν².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GprConfig {
    pub kernel: KernelSpec,
    pub lambda: f64,
    pub noise_variance: Option<f64>,
}

impl GprConfig {
    pub fn from_lambda(kernel: KernelSpec, lambda: f64) -> Result<Self> {
        kernel.validate()?;
        check_positive("lambda", lambda)?;
        Ok(GprConfig {
            kernel,
            lambda,
            noise_variance: None,
        })
    }

    /// `λ = ν²/n`.
    pub fn from_noise_variance(kernel: KernelSpec, noise_variance: f64, n: usize) -> Result<Self> {
        kernel.validate()?;
        check_positive("noise variance", noise_variance)?;
        if n == 0 {
            return Err(Error::input("sample size must be positive"));
        }
        Ok(GprConfig {
            kernel,
            lambda: noise_variance / n as f64,
            noise_variance: Some(noise_variance),
        })
    }
}

pub(crate) fn check_positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::input(format!("{what} must be a positive real, got {v}")))
    }
}

/// Mean and variance of a Gaussian predictive distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveDistribution {
    pub mean: f64,
    pub variance: f64,
}

/// Exact GPR with `K + ν²I` factorized once for repeated predictions.
#[derive(Debug, Clone)]
pub struct ExactGpr<'a> {
    data: &'a Dataset,
    kernel: KernelSpec,
    noise_variance: f64,
    gram: DMatrix<f64>,
    factor: SpdFactor,
    alpha: DVector<f64>,
}

impl<'a> ExactGpr<'a> {
    pub fn fit(data: &'a Dataset, kernel: KernelSpec, noise_variance: f64) -> Result<Self> {
        kernel.validate()?;
        check_positive("noise variance", noise_variance)?;
        let gram = kernel_matrix(&kernel, data.x());
        let factor = SpdFactor::with_shift(&gram, noise_variance)?;
        let alpha = factor.solve(&DVector::from_column_slice(data.y()));
        Ok(ExactGpr {
            data,
            kernel,
            noise_variance,
            gram,
            factor,
            alpha,
        })
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// `λ = ν²/n` for this fit.
    pub fn lambda(&self) -> f64 {
        self.noise_variance / self.data.n() as f64
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn cross(&self, x_star: &[f64]) -> Result<DVector<f64>> {
        cross_kernel(&self.kernel, self.data.x(), x_star)
    }

    pub fn predict(&self, x_star: &[f64]) -> Result<PredictiveDistribution> {
        let k = self.cross(x_star)?;
        let mean = k.dot(&self.alpha);
        let variance = self.kernel.value(x_star, x_star) - self.factor.inverse_quadratic_form(&k);
        Ok(PredictiveDistribution {
            mean,
            variance: variance.max(0.0),
        })
    }

    pub fn predict_mean(&self, x_star: &[f64]) -> Result<f64> {
        Ok(self.cross(x_star)?.dot(&self.alpha))
    }

    /// `v* = n(K + ν²I)⁻¹k` for the cross-kernel vector `k`, reusing the
    /// factorization.
    pub fn normalized_solution(&self, k: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(k) * self.data.n() as f64
    }
}

/// Exact predictive distribution at `x_star`.
pub fn exact_posterior(
    data: &Dataset,
    kernel: KernelSpec,
    noise_variance: f64,
    x_star: &[f64],
) -> Result<PredictiveDistribution> {
    ExactGpr::fit(data, kernel, noise_variance)?.predict(x_star)
}

fn check_dims(k_matrix: &DMatrix<f64>, vectors: &[(&str, usize)]) -> Result<usize> {
    let n = k_matrix.nrows();
    if k_matrix.ncols() != n {
        return Err(Error::input("kernel matrix must be square"));
    }
    for (name, len) in vectors {
        if *len != n {
            return Err(Error::input(format!(
                "{name} has length {len}, kernel matrix is {n}x{n}"
            )));
        }
    }
    Ok(n)
}

/// `(1/n)‖Kv/n − k‖² + (λ/n²)⟨v, Kv⟩`.
pub fn normalized_loss(
    k_matrix: &DMatrix<f64>,
    k: &DVector<f64>,
    lambda: f64,
    v: &DVector<f64>,
) -> Result<f64> {
    let n = check_dims(k_matrix, &[("k", k.len()), ("v", v.len())])? as f64;
    let kv = k_matrix * v;
    let fit = (&kv / n - k).norm_squared() / n;
    Ok(fit + lambda / (n * n) * v.dot(&kv))
}

/// Closed-form minimizer `v* = n(K + nλI)⁻¹k` of [`normalized_loss`].
pub fn solve_normalized(
    k_matrix: &DMatrix<f64>,
    k: &DVector<f64>,
    lambda: f64,
) -> Result<DVector<f64>> {
    let n = check_dims(k_matrix, &[("k", k.len())])? as f64;
    check_positive("lambda", lambda)?;
    let factor = SpdFactor::with_shift(k_matrix, n * lambda)?;
    Ok(factor.solve(k) * n)
}

/// `μ = ⟨v,y⟩/n`, `σ² = max(0, k(x*,x*) − ⟨v,k⟩/n)`.
pub fn mean_variance_from_v(
    v: &DVector<f64>,
    y: &[f64],
    k: &DVector<f64>,
    k_star: f64,
) -> Result<PredictiveDistribution> {
    let n = v.len();
    if y.len() != n || k.len() != n || n == 0 {
        return Err(Error::input(format!(
            "v, y and k must share a positive length (got {n}, {}, {})",
            y.len(),
            k.len()
        )));
    }
    let mean = v.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let variance = (k_star - v.dot(k) / n as f64).max(0.0);
    Ok(PredictiveDistribution { mean, variance })
}

/// RKHS norm `‖Φ(δ)‖ = sqrt(δᵀKδ)` of the kernel combination `Σ δᵢ φ(xᵢ)`.
///
/// `K` must be positive semidefinite up to `10⁻⁸·‖K‖_F`; anything more
/// indefinite is rejected.
pub fn rkhs_norm(k_matrix: &DMatrix<f64>, delta: &DVector<f64>) -> Result<f64> {
    check_dims(k_matrix, &[("delta", delta.len())])?;
    let scale = k_matrix.norm();
    if scale > 0.0 && SpdFactor::with_shift(k_matrix, 1e-8 * scale).is_err() {
        return Err(Error::input(
            "kernel matrix is not positive semidefinite within tolerance",
        ));
    }
    Ok(delta.dot(&(k_matrix * delta)).max(0.0).sqrt())
}

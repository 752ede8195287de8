//! Predictive-mean baselines: Nyström and random Fourier expansion.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, FeatureMatrix};
use crate::error::{Error, Result};
use crate::gpr::check_positive;
use crate::kernels::{kernel_block, kernel_submatrix, KernelSpec};
use crate::linalg::SpdFactor;
use crate::seed;
use crate::subsampling::sample_indices;

/// Relative eigenvalue cutoff for the landmark pseudo-inverse.
pub const NYSTROM_CUTOFF: f64 = 1e-10;

/// GPR mean under the Nyström kernel `K̃ = K_nm K_mm⁺ K_mn`.
///
/// With `K_mm = UΛUᵀ` (eigenvalues above the cutoff) and
/// `Φ = K_nm U Λ^{-1/2}`, the mean at `x*` is `k_m(x*)ᵀβ` with
/// `β = U Λ^{-1/2} (ΦᵀΦ + ν²I)⁻¹ Φᵀy`.
#[derive(Debug, Clone, PartialEq)]
pub struct NystromModel {
    kernel: KernelSpec,
    noise_variance: f64,
    landmarks: Vec<usize>,
    landmark_points: FeatureMatrix,
    beta: DVector<f64>,
    rank: usize,
}

impl NystromModel {
    /// Uniformly random landmarks.
    pub fn fit(
        data: &Dataset,
        kernel: KernelSpec,
        noise_variance: f64,
        m: usize,
        seed: u64,
    ) -> Result<Self> {
        let landmarks = sample_indices(data.n(), m, seed)?;
        Self::fit_on_landmarks(data, kernel, noise_variance, landmarks)
    }

    pub fn fit_on_landmarks(
        data: &Dataset,
        kernel: KernelSpec,
        noise_variance: f64,
        landmarks: Vec<usize>,
    ) -> Result<Self> {
        kernel.validate()?;
        check_positive("noise variance", noise_variance)?;
        if landmarks.is_empty() {
            return Err(Error::input("Nystrom needs at least one landmark"));
        }
        if landmarks.iter().any(|&i| i >= data.n()) {
            return Err(Error::input(format!("landmark out of range for n={}", data.n())));
        }
        let mut seen = landmarks.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != landmarks.len() {
            return Err(Error::input("landmarks must be distinct"));
        }

        let k_mm = kernel_submatrix(&kernel, data.x(), &landmarks);
        let all: Vec<usize> = (0..data.n()).collect();
        let k_nm = kernel_block(&kernel, data.x(), &all, &landmarks);

        let eig = SymmetricEigen::new(k_mm);
        let top = eig.eigenvalues.max();
        if top.is_nan() || top <= 0.0 {
            return Err(Error::Numerical("landmark kernel matrix has no positive eigenvalue".into()));
        }
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&i| eig.eigenvalues[i] > NYSTROM_CUTOFF * top)
            .collect();
        let rank = keep.len();
        // U_r Λ_r^{-1/2}
        let proj = DMatrix::from_fn(landmarks.len(), rank, |i, c| {
            eig.eigenvectors[(i, keep[c])] / eig.eigenvalues[keep[c]].sqrt()
        });
        let phi = &k_nm * &proj;
        let gram = phi.tr_mul(&phi);
        let factor = SpdFactor::with_shift(&gram, noise_variance)?;
        let y = DVector::from_column_slice(data.y());
        let c = factor.solve(&phi.tr_mul(&y));
        let beta = proj * c;
        Ok(NystromModel {
            kernel,
            noise_variance,
            landmark_points: data.x().select(&landmarks),
            landmarks,
            beta,
            rank,
        })
    }

    pub fn landmarks(&self) -> &[usize] {
        &self.landmarks
    }

    /// Number of landmark eigenpairs kept after the cutoff.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn predict(&self, x_star: &[f64]) -> Result<f64> {
        if x_star.len() != self.landmark_points.cols() {
            return Err(Error::input("query point dimension mismatch"));
        }
        Ok((0..self.landmarks.len())
            .map(|j| self.beta[j] * self.kernel.value(x_star, self.landmark_points.row(j)))
            .sum())
    }
}

/// Random Fourier features for the Gaussian kernel `exp(−‖x−x′‖²/h)`:
/// `z(x) = sqrt(2/D)·cos(Wx + b)` with `W_ij ~ N(0, 2/h)` and
/// `b_i ~ U[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierFeatures {
    frequencies: DMatrix<f64>,
    phases: DVector<f64>,
    bandwidth: f64,
}

impl FourierFeatures {
    pub fn sample(p: usize, bandwidth: f64, d: usize, seed: u64) -> Result<Self> {
        check_positive("bandwidth", bandwidth)?;
        if d == 0 || p == 0 {
            return Err(Error::input("feature count and input dimension must be positive"));
        }
        let mut rng = seed::rng(seed);
        let normal = Normal::new(0.0, (2.0 / bandwidth).sqrt())
            .map_err(|e| Error::input(e.to_string()))?;
        let frequencies = DMatrix::from_fn(d, p, |_, _| normal.sample(&mut rng));
        let phases = DVector::from_fn(d, |_, _| rng.random_range(0.0..std::f64::consts::TAU));
        Ok(FourierFeatures {
            frequencies,
            phases,
            bandwidth,
        })
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn phases(&self) -> &DVector<f64> {
        &self.phases
    }

    pub fn features(&self, x: &[f64]) -> DVector<f64> {
        let d = self.dim();
        let scale = (2.0 / d as f64).sqrt();
        DVector::from_fn(d, |i, _| {
            let w = self.frequencies.row(i);
            let t: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
            scale * (t + self.phases[i]).cos()
        })
    }
}

/// Ridge regression on random Fourier features, `(ZᵀZ + ν²I)w = Zᵀy`.
#[derive(Debug, Clone, PartialEq)]
pub struct RfeModel {
    features: FourierFeatures,
    weights: DVector<f64>,
    noise_variance: f64,
}

impl RfeModel {
    pub fn fit(
        data: &Dataset,
        kernel: KernelSpec,
        noise_variance: f64,
        d: usize,
        seed: u64,
    ) -> Result<Self> {
        let KernelSpec::Gaussian { h } = kernel else {
            return Err(Error::UnsupportedKernel(format!(
                "random Fourier features need a shift-invariant Gaussian kernel, got {}",
                kernel.name()
            )));
        };
        check_positive("noise variance", noise_variance)?;
        let features = FourierFeatures::sample(data.p(), h, d, seed)?;
        let mut z = DMatrix::zeros(data.n(), d);
        for i in 0..data.n() {
            z.row_mut(i).tr_copy_from(&features.features(data.row(i)));
        }
        let factor = SpdFactor::with_shift(&z.tr_mul(&z), noise_variance)?;
        let weights = factor.solve(&z.tr_mul(&DVector::from_column_slice(data.y())));
        Ok(RfeModel {
            features,
            weights,
            noise_variance,
        })
    }

    pub fn features(&self) -> &FourierFeatures {
        &self.features
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn predict(&self, x_star: &[f64]) -> Result<f64> {
        if x_star.len() != self.features.frequencies.ncols() {
            return Err(Error::input("query point dimension mismatch"));
        }
        Ok(self.features.features(x_star).dot(&self.weights))
    }
}

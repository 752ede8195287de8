//! Random subsampling of GPR.
//!
//! A uniformly random size-`s` subset `S` is drawn and the normalized loss
//! restricted to `S` is minimized in closed form,
//! `ṽ* = s(K_SS + sλI)⁻¹k_S`. Predictions then read
//! `μ̃ = ⟨ṽ*, y_S⟩/s` and `σ̃² = k(x*,x*) − ⟨ṽ*, k_S⟩/s`.
//! Nothing here depends on `n` beyond drawing the indices.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use crate::data::{Dataset, FeatureMatrix};
use crate::error::{Error, Result};
use crate::gpr::{check_positive, normalized_loss, PredictiveDistribution};
use crate::kernels::{kernel_submatrix, KernelQuery, KernelSpec};
use crate::linalg::SpdFactor;
use crate::seed::{self, Rng};

const RECORD_MAGIC: &str = "subgpr-model v1";

/// `k` distinct indices from `0..n` in draw order (a partial Fisher–Yates
/// shuffle on a sparse swap table, so memory and time are `O(k)`).
pub fn draw_distinct(n: usize, k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if k > n {
        return Err(Error::input(format!("cannot draw {k} distinct indices from {n}")));
    }
    let mut swapped: HashMap<usize, usize> = HashMap::with_capacity(2 * k);
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let j = rng.random_range(i..n);
        let at_j = *swapped.get(&j).unwrap_or(&j);
        let at_i = *swapped.get(&i).unwrap_or(&i);
        swapped.insert(j, at_i);
        out.push(at_j);
    }
    Ok(out)
}

/// A uniformly random size-`s` subset of `0..n`, sorted ascending.
/// Deterministic for a given seed.
pub fn sample_indices(n: usize, s: usize, seed: u64) -> Result<Vec<usize>> {
    if s == 0 || s > n {
        return Err(Error::input(format!("subsample size {s} must satisfy 1 <= s <= n={n}")));
    }
    let mut out = draw_distinct(n, s, &mut seed::rng(seed))?;
    out.sort_unstable();
    Ok(out)
}

/// The normalized loss at the subsample's own size `s`:
/// `(1/s)‖K_SS ṽ/s − k_S‖² + (λ/s²)⟨ṽ, K_SS ṽ⟩`.
pub fn restricted_loss(
    k_ss: &DMatrix<f64>,
    k_s: &DVector<f64>,
    lambda: f64,
    v_tilde: &DVector<f64>,
) -> Result<f64> {
    normalized_loss(k_ss, k_s, lambda, v_tilde)
}

/// Query-point quantities of the restricted problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleSolution {
    /// `(k(x*, x_i))_{i∈S}`
    pub k_s: DVector<f64>,
    /// `ṽ* = s(K_SS + sλI)⁻¹k_S`
    pub v_tilde: DVector<f64>,
    /// `k(x*, x*)`
    pub k_star: f64,
}

/// A fitted subsample: the index set, the subsampled points, and the
/// factorization of `K_SS + sλI`.
///
/// `weights` holds `(K_SS + sλI)⁻¹y_S`, so that `μ̃ = ⟨weights, k_S⟩`
/// without a solve per query.
#[derive(Debug, Clone)]
pub struct SubsampleModel {
    kernel: KernelSpec,
    lambda: f64,
    n: usize,
    indices: Vec<usize>,
    points: FeatureMatrix,
    targets: Vec<f64>,
    gram: DMatrix<f64>,
    factor: SpdFactor,
    weights: DVector<f64>,
}

impl PartialEq for SubsampleModel {
    fn eq(&self, other: &Self) -> bool {
        self.kernel == other.kernel
            && self.lambda.to_bits() == other.lambda.to_bits()
            && self.n == other.n
            && self.indices == other.indices
            && self.gram == other.gram
            && self.weights.len() == other.weights.len()
            && self
                .weights
                .iter()
                .zip(other.weights.iter())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl SubsampleModel {
    /// Draws `S` and solves the restricted problem.
    pub fn fit(data: &Dataset, kernel: KernelSpec, lambda: f64, s: usize, seed: u64) -> Result<Self> {
        Self::fit_with(data, &kernel, lambda, s, seed)
    }

    /// [`fit`](Self::fit) through an arbitrary kernel query oracle.
    pub fn fit_with<Q: KernelQuery + ?Sized>(
        data: &Dataset,
        kernel: &Q,
        lambda: f64,
        s: usize,
        seed: u64,
    ) -> Result<Self> {
        let indices = sample_indices(data.n(), s, seed)?;
        Self::fit_on_indices_with(data, kernel, lambda, indices)
    }

    /// Solves the restricted problem on a caller-chosen index set.
    pub fn fit_on_indices(
        data: &Dataset,
        kernel: KernelSpec,
        lambda: f64,
        indices: Vec<usize>,
    ) -> Result<Self> {
        Self::fit_on_indices_with(data, &kernel, lambda, indices)
    }

    pub fn fit_on_indices_with<Q: KernelQuery + ?Sized>(
        data: &Dataset,
        kernel: &Q,
        lambda: f64,
        mut indices: Vec<usize>,
    ) -> Result<Self> {
        let spec = kernel.spec();
        spec.validate()?;
        check_positive("lambda", lambda)?;
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::input("subsample must be nonempty"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= data.n()) {
            return Err(Error::input(format!("index {bad} out of range for n={}", data.n())));
        }
        let s = indices.len();
        let points = data.x().select(&indices);
        let targets: Vec<f64> = indices.iter().map(|&i| data.y()[i]).collect();
        let all: Vec<usize> = (0..s).collect();
        let gram = kernel_submatrix(kernel, &points, &all);
        let factor = SpdFactor::with_shift(&gram, s as f64 * lambda)?;
        let weights = factor.solve(&DVector::from_column_slice(&targets));
        Ok(SubsampleModel {
            kernel: spec,
            lambda,
            n: data.n(),
            indices,
            points,
            targets,
            gram,
            factor,
            weights,
        })
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.indices.len()
    }

    /// Sorted, 0-based positions of the subsample in the original data.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// `K_SS`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// `(K_SS + sλI)⁻¹y_S`.
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    fn check_query(&self, x_star: &[f64]) -> Result<()> {
        if x_star.len() != self.points.cols() {
            return Err(Error::input(format!(
                "query point has dimension {}, model has {}",
                x_star.len(),
                self.points.cols()
            )));
        }
        Ok(())
    }

    /// `k_S`, `k(x*,x*)` and `ṽ*` for one query point: `s + 1` kernel queries
    /// and one solve with the stored factor.
    pub fn solve_with<Q: KernelQuery + ?Sized>(
        &self,
        kernel: &Q,
        x_star: &[f64],
    ) -> Result<SubsampleSolution> {
        self.check_query(x_star)?;
        let k_s = DVector::from_iterator(
            self.s(),
            (0..self.s()).map(|i| kernel.query(x_star, self.points.row(i))),
        );
        let k_star = kernel.query(x_star, x_star);
        let v_tilde = self.factor.solve(&k_s) * self.s() as f64;
        Ok(SubsampleSolution {
            k_s,
            v_tilde,
            k_star,
        })
    }

    pub fn solve(&self, x_star: &[f64]) -> Result<SubsampleSolution> {
        self.solve_with(&self.kernel, x_star)
    }

    /// Predictive mean and clamped variance from a solved query.
    pub fn predict_from(&self, sol: &SubsampleSolution) -> PredictiveDistribution {
        let s = self.s() as f64;
        let mean = sol
            .v_tilde
            .iter()
            .zip(&self.targets)
            .map(|(v, y)| v * y)
            .sum::<f64>()
            / s;
        let variance = (sol.k_star - sol.v_tilde.dot(&sol.k_s) / s).max(0.0);
        PredictiveDistribution { mean, variance }
    }

    pub fn predict(&self, x_star: &[f64]) -> Result<PredictiveDistribution> {
        Ok(self.predict_from(&self.solve(x_star)?))
    }

    pub fn predict_with<Q: KernelQuery + ?Sized>(
        &self,
        kernel: &Q,
        x_star: &[f64],
    ) -> Result<PredictiveDistribution> {
        Ok(self.predict_from(&self.solve_with(kernel, x_star)?))
    }

    /// Predictive mean only, via the stored weights.
    pub fn predict_mean(&self, x_star: &[f64]) -> Result<f64> {
        self.check_query(x_star)?;
        Ok((0..self.s())
            .map(|i| self.weights[i] * self.kernel.value(x_star, self.points.row(i)))
            .sum())
    }

    /// Restricted loss `ℓ_{K_SS,k_S,λ}` at a vector `v`.
    pub fn restricted_loss(&self, k_s: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        restricted_loss(&self.gram, k_s, self.lambda, v)
    }

    /// Plain-text record:
    ///
    /// ```text
    /// subgpr-model v1
    /// <kernel spec>
    /// <lambda>
    /// <n> <s>
    /// <0-based indices>
    /// <weights (K_SS + sλI)⁻¹y_S, 17 significant digits>
    /// ```
    pub fn to_record(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{RECORD_MAGIC}");
        let _ = writeln!(out, "{}", self.kernel);
        let _ = writeln!(out, "{:.16e}", self.lambda);
        let _ = writeln!(out, "{} {}", self.n, self.s());
        let idx: Vec<String> = self.indices.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "{}", idx.join(" "));
        let w: Vec<String> = self.weights.iter().map(|w| format!("{w:.16e}")).collect();
        let _ = writeln!(out, "{}", w.join(" "));
        out
    }

    /// Rebuilds a model from [`to_record`](Self::to_record) output and the
    /// dataset it was fitted on. The stored weights must agree with the
    /// refitted ones.
    pub fn from_record(text: &str, data: &Dataset) -> Result<Self> {
        let mut lines = text.lines();
        let mut next = |what: &str, line: usize| {
            lines.next().ok_or_else(|| Error::Parse {
                line,
                message: format!("missing {what}"),
            })
        };
        let perr = |line: usize, message: String| Error::Parse { line, message };
        let magic = next("header", 1)?;
        if magic.trim() != RECORD_MAGIC {
            return Err(perr(1, format!("expected `{RECORD_MAGIC}`, got `{magic}`")));
        }
        let kernel: KernelSpec = next("kernel", 2)?
            .trim()
            .parse()
            .map_err(|e: Error| perr(2, e.to_string()))?;
        let lambda: f64 = next("lambda", 3)?
            .trim()
            .parse()
            .map_err(|_| perr(3, "bad lambda".into()))?;
        let sizes: Vec<usize> = next("sizes", 4)?
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| perr(4, "bad sizes".into()))?;
        let [n, s] = sizes[..] else {
            return Err(perr(4, "expected `n s`".into()));
        };
        let indices: Vec<usize> = next("indices", 5)?
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| perr(5, "bad index".into()))?;
        let weights: Vec<f64> = next("weights", 6)?
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| perr(6, "bad weight".into()))?;
        if indices.len() != s || weights.len() != s {
            return Err(perr(5, format!("expected {s} indices and weights")));
        }
        if n != data.n() {
            return Err(Error::input(format!(
                "record was fitted on n={n}, dataset has n={}",
                data.n()
            )));
        }
        let model = Self::fit_on_indices(data, kernel, lambda, indices)?;
        let scale = model.weights.amax().max(1.0);
        let agree = model
            .weights
            .iter()
            .zip(&weights)
            .all(|(a, b)| (a - b).abs() <= 1e-8 * scale);
        if model.s() != s || !agree {
            return Err(Error::input("record does not match the dataset"));
        }
        Ok(model)
    }
}

/// Draws a size-`s` subsample and solves the restricted problem.
pub fn approx_solve(
    data: &Dataset,
    kernel: KernelSpec,
    lambda: f64,
    s: usize,
    seed: u64,
) -> Result<SubsampleModel> {
    SubsampleModel::fit(data, kernel, lambda, s, seed)
}

/// Approximate predictive mean and variance at `x_star`.
pub fn approx_predict(model: &SubsampleModel, x_star: &[f64]) -> Result<PredictiveDistribution> {
    model.predict(x_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthetic_regression, Truth};
    use crate::gpr::{solve_normalized, ExactGpr};
    use crate::kernels::{cross_kernel, kernel_matrix, CountingKernel};

    #[test]
    fn full_subsample_is_identity() {
        for seed in 0..5 {
            assert_eq!(sample_indices(5, 5, seed).unwrap(), vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_distinct() {
        let a = sample_indices(1000, 50, 42).unwrap();
        assert_eq!(a, sample_indices(1000, 50, 42).unwrap());
        assert_ne!(a, sample_indices(1000, 50, 43).unwrap());
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(a.iter().all(|&i| i < 1000));
    }

    #[test]
    fn oversized_subsample_rejected() {
        assert!(matches!(sample_indices(3, 4, 0), Err(Error::Input(_))));
        assert!(matches!(sample_indices(3, 0, 0), Err(Error::Input(_))));
    }

    #[test]
    fn sampling_is_uniform() {
        // Monte Carlo: each of 10 indices should appear with frequency 3/10.
        let draws = 100_000;
        let mut counts = [0usize; 10];
        for seed in 0..draws {
            for i in sample_indices(10, 3, seed).unwrap() {
                counts[i] += 1;
            }
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.3).abs() < 0.01, "frequency {freq}");
        }
    }

    #[test]
    fn restricted_loss_examples() {
        let k = DMatrix::from_element(1, 1, 2.0);
        let ks = DVector::from_element(1, 1.0);
        assert_eq!(
            restricted_loss(&k, &ks, 0.5, &DVector::from_element(1, 1.0)).unwrap(),
            2.0
        );
        let k3 = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]);
        let ks = DVector::from_vec(vec![0.5, -0.25]);
        let zero = restricted_loss(&k3, &ks, 0.1, &DVector::zeros(2)).unwrap();
        assert!((zero - ks.norm_squared() / 2.0).abs() < 1e-15);
    }

    fn small_data() -> Dataset {
        synthetic_regression(Truth::Sin2Pi, 30, 0.1, 2, 4).unwrap().data
    }

    #[test]
    fn scalar_subsample_closed_form() {
        let data = small_data();
        let kernel = KernelSpec::gaussian(0.8);
        let lambda = 0.3;
        let model = SubsampleModel::fit(&data, kernel, lambda, 1, 9).unwrap();
        let x_star = [0.1, -0.4];
        let sol = model.solve(&x_star).unwrap();
        let c = model.gram()[(0, 0)];
        let d = sol.k_s[0];
        assert!((sol.v_tilde[0] - d / (c + lambda)).abs() < 1e-15);
    }

    #[test]
    fn identity_subsample_matches_exact() {
        let data = small_data();
        let kernel = KernelSpec::gaussian(0.5);
        let nu2 = 0.05;
        let lambda = nu2 / data.n() as f64;
        let model = SubsampleModel::fit(&data, kernel, lambda, data.n(), 3).unwrap();
        let exact = ExactGpr::fit(&data, kernel, nu2).unwrap();
        let kmat = kernel_matrix(&kernel, data.x());
        for x_star in [[0.0, 0.0], [0.7, -0.9], [-0.3, 0.5]] {
            let sol = model.solve(&x_star).unwrap();
            let k = cross_kernel(&kernel, data.x(), &x_star).unwrap();
            let v = solve_normalized(&kmat, &k, lambda).unwrap();
            assert!((&sol.v_tilde - &v).amax() < 1e-8 * v.amax().max(1.0));
            let a = model.predict(&x_star).unwrap();
            let b = exact.predict(&x_star).unwrap();
            assert!((a.mean - b.mean).abs() < 1e-8);
            assert!((a.variance - b.variance).abs() < 1e-8);
            assert!((model.predict_mean(&x_star).unwrap() - a.mean).abs() < 1e-10);
        }
    }

    #[test]
    fn minimizer_beats_perturbations() {
        let data = small_data();
        let model = SubsampleModel::fit(&data, KernelSpec::gaussian(1.0), 0.01, 12, 5).unwrap();
        let sol = model.solve(&[0.2, 0.2]).unwrap();
        let best = model.restricted_loss(&sol.k_s, &sol.v_tilde).unwrap();
        let mut rng = seed::rng(1);
        for _ in 0..100 {
            let delta = DVector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
            let other = model.restricted_loss(&sol.k_s, &(&sol.v_tilde + delta)).unwrap();
            assert!(other >= best - 1e-12);
        }
    }

    #[test]
    fn queries_stay_within_budget() {
        let data = synthetic_regression(Truth::Sin2Pi, 500, 0.1, 1, 2).unwrap().data;
        let counter = CountingKernel::new(KernelSpec::gaussian(1.0));
        let s = 20;
        let model = SubsampleModel::fit_with(&data, &counter, 1e-3, s, 8).unwrap();
        let fit_queries = counter.count();
        assert!(fit_queries <= s * s);
        model.predict_with(&counter, &[0.3]).unwrap();
        assert!(counter.count() <= s * s + s + 1);
        assert!(counter.count() < data.n());
    }

    #[test]
    fn fits_are_bit_identical() {
        let data = small_data();
        let a = SubsampleModel::fit(&data, KernelSpec::laplacian(2.0), 0.01, 10, 77).unwrap();
        let b = SubsampleModel::fit(&data, KernelSpec::laplacian(2.0), 0.01, 10, 77).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_record(), b.to_record());
    }

    #[test]
    fn zero_coefficients_give_prior() {
        let data = small_data();
        let model = SubsampleModel::fit(&data, KernelSpec::gaussian(1.0), 0.01, 5, 1).unwrap();
        let mut sol = model.solve(&[0.0, 0.0]).unwrap();
        sol.v_tilde.fill(0.0);
        let p = model.predict_from(&sol);
        assert_eq!((p.mean, p.variance), (0.0, 1.0));
    }

    #[test]
    fn record_round_trip() {
        let data = small_data();
        let model = SubsampleModel::fit(&data, KernelSpec::polynomial(2.0), 0.02, 7, 5).unwrap();
        let text = model.to_record();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], "subgpr-model v1");
        assert_eq!(lines[3], "30 7");
        let back = SubsampleModel::from_record(&text, &data).unwrap();
        assert_eq!(back.indices(), model.indices());
        let p = back.predict(&[0.1, 0.1]).unwrap();
        let q = model.predict(&[0.1, 0.1]).unwrap();
        assert_eq!(p, q);

        let other = synthetic_regression(Truth::Sin2Pi, 30, 0.1, 2, 99).unwrap().data;
        assert!(SubsampleModel::from_record(&text, &other).is_err());
        let broken = text.replacen("subgpr-model v1", "subgpr-model v2", 1);
        assert!(matches!(
            SubsampleModel::from_record(&broken, &data),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}

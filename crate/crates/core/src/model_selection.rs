//! Cross-validation over `(ν², h)` and the CV success-probability harness.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::baselines::{NystromModel, RfeModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gpr::{check_positive, ExactGpr};
use crate::kernels::KernelSpec;
use crate::seed::{self, derive_seed};
use crate::subsampling::{draw_distinct, sample_indices, SubsampleModel};

/// How `λ` is derived from `ν²` for a subsampled fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaConvention {
    /// `λ = ν²/n` with `n` the size of the data the subsample is drawn from.
    #[default]
    Global,
    /// `λ = ν²/s`.
    PerSize,
}

impl LambdaConvention {
    pub fn lambda(self, noise_variance: f64, n: usize, s: usize) -> f64 {
        match self {
            LambdaConvention::Global => noise_variance / n as f64,
            LambdaConvention::PerSize => noise_variance / s as f64,
        }
    }
}

impl fmt::Display for LambdaConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LambdaConvention::Global => "global",
            LambdaConvention::PerSize => "per-size",
        })
    }
}

impl FromStr for LambdaConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(LambdaConvention::Global),
            "per-size" => Ok(LambdaConvention::PerSize),
            other => Err(Error::input(format!(
                "unknown lambda convention `{other}` (expected global or per-size)"
            ))),
        }
    }
}

/// One `(ν², h)` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub noise_variance: f64,
    pub bandwidth: f64,
}

impl Hyper {
    pub fn new(noise_variance: f64, bandwidth: f64) -> Result<Self> {
        check_positive("noise variance", noise_variance)?;
        check_positive("bandwidth", bandwidth)?;
        Ok(Hyper {
            noise_variance,
            bandwidth,
        })
    }
}

/// Candidate noise variances and bandwidths.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    noise_variances: Vec<f64>,
    bandwidths: Vec<f64>,
}

impl HyperGrid {
    pub fn new(noise_variances: Vec<f64>, bandwidths: Vec<f64>) -> Result<Self> {
        if noise_variances.is_empty() || bandwidths.is_empty() {
            return Err(Error::input("hyperparameter grid must be nonempty"));
        }
        for &v in &noise_variances {
            check_positive("grid noise variance", v)?;
        }
        for &h in &bandwidths {
            check_positive("grid bandwidth", h)?;
        }
        Ok(HyperGrid {
            noise_variances,
            bandwidths,
        })
    }

    /// `ν², h⁻¹ ∈ {10^{-i/3} : i = 0..11}`.
    pub fn log_spaced() -> Self {
        HyperGrid {
            noise_variances: log_grid(false),
            bandwidths: log_grid(true),
        }
    }

    pub fn noise_variances(&self) -> &[f64] {
        &self.noise_variances
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn len(&self) -> usize {
        self.noise_variances.len() * self.bandwidths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cells in row-major order (noise variance outer).
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, Hyper)> + '_ {
        self.noise_variances.iter().enumerate().flat_map(move |(a, &v)| {
            self.bandwidths.iter().enumerate().map(move |(b, &h)| {
                (
                    a,
                    b,
                    Hyper {
                        noise_variance: v,
                        bandwidth: h,
                    },
                )
            })
        })
    }
}

/// `{10^{-i/3}}` (or the reciprocals) for `i = 0..11`.
pub fn log_grid(reciprocal: bool) -> Vec<f64> {
    (0..12)
        .map(|i| {
            let e = i as f64 / 3.0;
            10f64.powf(if reciprocal { e } else { -e })
        })
        .collect()
}

/// Predictor trained inside each fold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CvPredictor {
    /// Subsampled GPR on `s` points of the fold's training part.
    Subsampled { s: usize, convention: LambdaConvention },
    /// Exact GPR on the whole training part.
    Exact,
    /// Nyström mean with `m` uniform landmarks from the training part.
    Nystrom { m: usize },
    /// Random Fourier expansion with `features` features.
    Rfe { features: usize },
}

/// Mean squared held-out error `(1/q)Σ_{i∈Q}(y_i − f̂(x_i))²` over `rows`.
pub fn cv_loss<F>(predictor: F, data: &Dataset, rows: &[usize]) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if rows.is_empty() {
        return Err(Error::input("holdout set is empty"));
    }
    let mut total = 0.0;
    for &i in rows {
        let r = data.y()[i] - predictor(data.row(i))?;
        total += r * r;
    }
    Ok(total / rows.len() as f64)
}

/// Error surface of a k-fold grid search and its selected cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub grid: HyperGrid,
    /// `errors[a][b]`: mean CV loss at `(ν²_a, h_b)`.
    pub errors: Vec<Vec<f64>>,
    pub selected: (usize, usize),
    pub folds: usize,
    pub seed: u64,
}

impl CvReport {
    pub fn selected_hyper(&self) -> Hyper {
        Hyper {
            noise_variance: self.grid.noise_variances[self.selected.0],
            bandwidth: self.grid.bandwidths[self.selected.1],
        }
    }

    pub fn selected_error(&self) -> f64 {
        self.errors[self.selected.0][self.selected.1]
    }

    /// `max − min` of the surface; a small range means a flat landscape.
    pub fn range(&self) -> f64 {
        let all = self.errors.iter().flatten();
        let max = all.clone().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = all.cloned().fold(f64::INFINITY, f64::min);
        max - min
    }
}

/// Argmin of `errors`, ties going to the lexicographically smallest `(ν², h)`.
pub fn select_cell(grid: &HyperGrid, errors: &[Vec<f64>]) -> (usize, usize) {
    let key = |a: usize, b: usize| {
        let e = errors[a][b];
        (
            if e.is_nan() { f64::INFINITY } else { e },
            grid.noise_variances[a],
            grid.bandwidths[b],
        )
    };
    let mut best = (0, 0);
    for (a, b, _) in grid.cells() {
        let (e, v, h) = key(a, b);
        let (be, bv, bh) = key(best.0, best.1);
        if e < be || (e == be && (v, h) < (bv, bh)) {
            best = (a, b);
        }
    }
    best
}

/// Contiguous chunks of one seeded shuffle of `0..n`.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::input("need at least 2 folds"));
    }
    if n < folds {
        return Err(Error::input(format!("{n} samples cannot fill {folds} folds")));
    }
    let order = draw_distinct(n, n, &mut seed::rng(seed))?;
    Ok((0..folds)
        .map(|f| order[f * n / folds..(f + 1) * n / folds].to_vec())
        .collect())
}

/// One fold: training and holdout rows, the fold's subsample (positions
/// within `train`) and a seed for randomized baselines.
struct Fold {
    train: Vec<usize>,
    holdout: Vec<usize>,
    subset: Option<Vec<usize>>,
    seed: u64,
}

/// Fits one predictor on the fold's training rows and scores it on the
/// holdout rows.
fn fold_error(
    data: &Dataset,
    fold: &Fold,
    kernel: KernelSpec,
    hyper: Hyper,
    predictor: CvPredictor,
) -> Result<f64> {
    let kernel = kernel.with_bandwidth(hyper.bandwidth);
    let (train, holdout) = (&fold.train[..], &fold.holdout[..]);
    match predictor {
        CvPredictor::Exact => {
            let train_data = data.select(train)?;
            let model = ExactGpr::fit(&train_data, kernel, hyper.noise_variance)?;
            cv_loss(|x| model.predict_mean(x), data, holdout)
        }
        CvPredictor::Nystrom { m } => {
            let train_data = data.select(train)?;
            let model = NystromModel::fit(&train_data, kernel, hyper.noise_variance, m, fold.seed)?;
            cv_loss(|x| model.predict(x), data, holdout)
        }
        CvPredictor::Rfe { features } => {
            let train_data = data.select(train)?;
            let model = RfeModel::fit(&train_data, kernel, hyper.noise_variance, features, fold.seed)?;
            cv_loss(|x| model.predict(x), data, holdout)
        }
        CvPredictor::Subsampled { s, convention } => {
            let subset = fold.subset.as_deref().expect("subsampled predictor needs a subset");
            let lambda = convention.lambda(hyper.noise_variance, train.len(), s);
            let picked: Vec<usize> = subset.iter().map(|&k| train[k]).collect();
            let model = SubsampleModel::fit_on_indices(data, kernel, lambda, picked)?;
            cv_loss(|x| model.predict_mean(x), data, holdout)
        }
    }
}

/// k-fold grid search.
///
/// Folds come from a single seeded shuffle. Each fold draws its subsample
/// (or landmarks, or features) once, from a seed derived from the fold
/// number, and every grid cell reuses it.
pub fn kfold_grid_select(
    data: &Dataset,
    grid: &HyperGrid,
    kernel: KernelSpec,
    predictor: CvPredictor,
    folds: usize,
    seed: u64,
) -> Result<CvReport> {
    kernel.validate()?;
    let chunks = fold_assignment(data.n(), folds, seed)?;
    let fold_sets: Vec<Fold> = (0..folds)
        .map(|f| {
            let train: Vec<usize> = chunks
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, c)| c.iter().copied())
                .collect();
            let fold_seed = derive_seed(seed, f as u64 + 1);
            let subset = match predictor {
                CvPredictor::Subsampled { s, .. } => {
                    if s > train.len() {
                        return Err(Error::input(format!(
                            "subsample size {s} exceeds fold training size {}",
                            train.len()
                        )));
                    }
                    Some(sample_indices(train.len(), s, fold_seed)?)
                }
                _ => None,
            };
            Ok(Fold {
                train,
                holdout: chunks[f].clone(),
                subset,
                seed: fold_seed,
            })
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize, Hyper)> = grid.cells().collect();
    let flat: Vec<f64> = cells
        .par_iter()
        .map(|&(_, _, hyper)| {
            let mut total = 0.0;
            for fold in &fold_sets {
                total += fold_error(data, fold, kernel, hyper, predictor)?;
            }
            Ok(total / folds as f64)
        })
        .collect::<Result<_>>()?;
    let width = grid.bandwidths.len();
    let errors: Vec<Vec<f64>> = flat.chunks(width).map(<[f64]>::to_vec).collect();
    let selected = select_cell(grid, &errors);
    Ok(CvReport {
        grid: grid.clone(),
        errors,
        selected,
        folds,
        seed,
    })
}

/// Held-out losses of the two candidates in one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvTrialOutcome {
    pub cv1: f64,
    pub cv2: f64,
}

impl CvTrialOutcome {
    pub fn success(&self) -> bool {
        self.cv1 <= self.cv2
    }
}

/// Settings shared by every trial of the success harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvTrialSetup {
    pub kernel: KernelSpec,
    pub theta1: Hyper,
    pub theta2: Hyper,
    pub s: usize,
    pub q: usize,
    pub convention: LambdaConvention,
}

/// Runs `trials` independent trials. Each draws a dataset from `generate`,
/// a subsample `S` of size `s` and a disjoint holdout `Q` of size `q`, fits
/// both candidates on `S`, and records their CV losses on `Q`.
pub fn cv_trial_outcomes<G>(
    setup: &CvTrialSetup,
    generate: G,
    trials: usize,
    seed: u64,
) -> Result<Vec<CvTrialOutcome>>
where
    G: Fn(u64) -> Result<Dataset> + Sync,
{
    if trials == 0 {
        return Err(Error::input("need at least one trial"));
    }
    if setup.s == 0 || setup.q == 0 {
        return Err(Error::input("subsample and holdout sizes must be positive"));
    }
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let data = generate(derive_seed(seed, 2 * t))?;
            let n = data.n();
            if setup.s + setup.q > n {
                return Err(Error::input(format!(
                    "s + q = {} exceeds n = {n}",
                    setup.s + setup.q
                )));
            }
            let mut rng = seed::rng(derive_seed(seed, 2 * t + 1));
            let drawn = draw_distinct(n, setup.s + setup.q, &mut rng)?;
            let (subset, holdout) = drawn.split_at(setup.s);
            let loss = |theta: Hyper| -> Result<f64> {
                let lambda = setup.convention.lambda(theta.noise_variance, n, setup.s);
                let kernel = setup.kernel.with_bandwidth(theta.bandwidth);
                let model = SubsampleModel::fit_on_indices(&data, kernel, lambda, subset.to_vec())?;
                cv_loss(|x| model.predict_mean(x), &data, holdout)
            };
            let cv1 = loss(setup.theta1)?;
            let cv2 = if setup.theta2 == setup.theta1 {
                cv1
            } else {
                loss(setup.theta2)?
            };
            Ok(CvTrialOutcome { cv1, cv2 })
        })
        .collect()
}

/// Fraction of trials in which `θ1` scores no worse than `θ2`.
pub fn cv_success_trial<G>(setup: &CvTrialSetup, generate: G, trials: usize, seed: u64) -> Result<f64>
where
    G: Fn(u64) -> Result<Dataset> + Sync,
{
    let outcomes = cv_trial_outcomes(setup, generate, trials, seed)?;
    Ok(outcomes.iter().filter(|o| o.success()).count() as f64 / outcomes.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthetic_regression, Truth};

    #[test]
    fn cv_loss_examples() {
        let d = Dataset::from_rows(vec![vec![0.0], vec![1.0]], vec![1.0, 1.0]).unwrap();
        assert_eq!(cv_loss(|_| Ok(1.0), &d, &[0, 1]).unwrap(), 0.0);
        assert_eq!(cv_loss(|_| Ok(0.0), &d, &[0, 1]).unwrap(), 1.0);
        let d = Dataset::from_rows(vec![vec![0.0], vec![1.0]], vec![1.0, -3.0]).unwrap();
        assert_eq!(cv_loss(|_| Ok(0.0), &d, &[0, 1]).unwrap(), 5.0);
        assert!(matches!(cv_loss(|_| Ok(0.0), &d, &[]), Err(Error::Input(_))));
    }

    #[test]
    fn default_grid() {
        let g = HyperGrid::log_spaced();
        assert_eq!(g.len(), 144);
        assert_eq!(g.noise_variances()[0], 1.0);
        assert!((g.noise_variances()[3] - 0.1).abs() < 1e-15);
        assert!((g.bandwidths()[11] - 10f64.powf(11.0 / 3.0)).abs() < 1e-9);
        assert!(HyperGrid::new(vec![], vec![1.0]).is_err());
        assert!(HyperGrid::new(vec![-1.0], vec![1.0]).is_err());
    }

    #[test]
    fn tie_break_prefers_smaller_cell() {
        let grid = HyperGrid::new(vec![0.1, 0.01], vec![10.0, 1.0]).unwrap();
        let flat = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(select_cell(&grid, &flat), (1, 1));
        let errs = vec![vec![0.5, 2.0], vec![0.5, 0.7]];
        assert_eq!(select_cell(&grid, &errs), (1, 0));
        let nan = vec![vec![f64::NAN, 2.0], vec![3.0, 4.0]];
        assert_eq!(select_cell(&grid, &nan), (0, 1));
    }

    #[test]
    fn folds_partition_the_data() {
        let folds = fold_assignment(23, 5, 7).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(folds.iter().all(|f| f.len() >= 4));
        assert_eq!(folds, fold_assignment(23, 5, 7).unwrap());
        assert!(fold_assignment(3, 5, 0).is_err());
        assert!(fold_assignment(10, 1, 0).is_err());
    }

    fn small() -> Dataset {
        synthetic_regression(Truth::Sin2Pi, 60, 0.1, 1, 2).unwrap().data
    }

    #[test]
    fn single_cell_is_selected() {
        let grid = HyperGrid::new(vec![0.01], vec![1.0]).unwrap();
        let pred = CvPredictor::Subsampled {
            s: 20,
            convention: LambdaConvention::Global,
        };
        let r = kfold_grid_select(&small(), &grid, KernelSpec::gaussian(1.0), pred, 3, 1).unwrap();
        assert_eq!(r.selected, (0, 0));
        assert_eq!(r.range(), 0.0);
        assert!(r.selected_error() >= 0.0);
    }

    #[test]
    fn grid_search_is_deterministic() {
        let grid = HyperGrid::new(vec![0.1, 0.01], vec![0.1, 1.0, 10.0]).unwrap();
        let k = KernelSpec::gaussian(1.0);
        for pred in [
            CvPredictor::Exact,
            CvPredictor::Nystrom { m: 10 },
            CvPredictor::Rfe { features: 12 },
            CvPredictor::Subsampled {
                s: 15,
                convention: LambdaConvention::PerSize,
            },
        ] {
            let a = kfold_grid_select(&small(), &grid, k, pred, 4, 9).unwrap();
            let b = kfold_grid_select(&small(), &grid, k, pred, 4, 9).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.selected, select_cell(&grid, &a.errors));
        }
    }

    #[test]
    fn oversized_subsample_rejected() {
        let grid = HyperGrid::new(vec![0.01], vec![1.0]).unwrap();
        let pred = CvPredictor::Subsampled {
            s: 59,
            convention: LambdaConvention::Global,
        };
        assert!(kfold_grid_select(&small(), &grid, KernelSpec::gaussian(1.0), pred, 3, 1).is_err());
    }

    #[test]
    fn identical_candidates_always_succeed() {
        let theta = Hyper::new(0.01, 1.0).unwrap();
        let setup = CvTrialSetup {
            kernel: KernelSpec::gaussian(1.0),
            theta1: theta,
            theta2: theta,
            s: 10,
            q: 10,
            convention: LambdaConvention::Global,
        };
        let gen = |seed| Ok(synthetic_regression(Truth::Sin2Pi, 40, 0.1, 1, seed)?.data);
        assert_eq!(cv_success_trial(&setup, gen, 12, 3).unwrap(), 1.0);
        let bad = CvTrialSetup { s: 35, ..setup };
        assert!(matches!(cv_success_trial(&bad, gen, 2, 3), Err(Error::Input(_))));
    }

    #[test]
    fn convention_round_trip() {
        for c in [LambdaConvention::Global, LambdaConvention::PerSize] {
            assert_eq!(c.to_string().parse::<LambdaConvention>().unwrap(), c);
        }
        assert_eq!(LambdaConvention::Global.lambda(0.01, 100, 10), 1e-4);
        assert_eq!(LambdaConvention::PerSize.lambda(0.01, 100, 10), 1e-3);
    }
}

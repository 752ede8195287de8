//! Test error against time for subsampling, Nyström and random features.

use std::time::Instant;

use subgpr::model_selection::kfold_grid_select;
use subgpr::{
    CvPredictor, Dataset, Error, HyperGrid, KernelSpec, LambdaConvention, NystromModel, Result,
    RfeModel, SubsampleModel, Truth,
};

use super::cv::grid_for;
use super::*;
use crate::args::{GridChoice, TradeoffArgs};
use crate::output::{Echo, Table, Value};

pub const DEFAULT_FOLDS: usize = 3;
pub const DEFAULT_TRIALS: usize = 1;
pub const DEFAULT_N: usize = 6000;

/// `{10·2^i : i = 4..8}`.
pub fn default_subsample_sizes() -> Vec<usize> {
    (4..=8).map(|i| 10 << i).collect()
}

/// `{10·2^i : i = 1..5}`.
pub fn default_baseline_sizes() -> Vec<usize> {
    (1..=5).map(|i| 10 << i).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Subsampling,
    Nystrom,
    Rfe,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Subsampling => "subsampling",
            Method::Nystrom => "nystrom",
            Method::Rfe => "rfe",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffConfig {
    pub source: Source,
    pub kernel: KernelSpec,
    pub grid_choice: GridChoice,
    pub grid: HyperGrid,
    pub convention: LambdaConvention,
    pub s_grid: Vec<usize>,
    pub baseline_grid: Vec<usize>,
    pub test_size: usize,
    pub folds: usize,
    pub trials: usize,
    pub seed: u64,
}

impl TradeoffConfig {
    pub fn from_args(args: &TradeoffArgs) -> Result<Self> {
        let c = &args.common;
        let folds = c.folds.unwrap_or(DEFAULT_FOLDS);
        if folds < 2 {
            return Err(Error::Input("--folds must be at least 2".into()));
        }
        Ok(TradeoffConfig {
            source: Source::resolve(c, Truth::Sin2Pi, DEFAULT_N, 0.1)?,
            kernel: single_kernel(&c.kernel, c.h.unwrap_or(DEFAULT_H))?,
            grid_choice: args.grid,
            grid: grid_for(args.grid),
            convention: c.lambda_convention,
            s_grid: size_grid(&c.s_grid, &default_subsample_sizes(), "--s-grid")?,
            baseline_grid: size_grid(&args.baseline_grid, &default_baseline_sizes(), "--baseline-grid")?,
            test_size: at_least_one("--test-size", args.test_size)?,
            folds,
            trials: at_least_one("--trials", c.trials.unwrap_or(DEFAULT_TRIALS))?,
            seed: c.seed,
        })
    }

    pub fn echo(&self) -> Echo {
        let mut e = Echo::default();
        e.push("command", "tradeoff");
        self.source.echo(&mut e);
        e.push("kernel", self.kernel.name());
        e.push("grid", format!("{:?}", self.grid_choice).to_lowercase());
        e.push("lambda_convention", self.convention);
        e.push("s_grid", join(&self.s_grid));
        e.push("baseline_grid", join(&self.baseline_grid));
        e.push("test_size", self.test_size);
        e.push("folds", self.folds);
        e.push("trials", self.trials);
        e
    }
}

/// Columns holding wall-clock times, which differ between runs.
pub const TIMING_COLUMNS: [&str; 3] = ["fit_ms", "cv_ms", "predict_ms"];

fn millis(start: Instant) -> f64 {
    // Strictly positive even when the clock does not advance.
    (start.elapsed().as_secs_f64() * 1e3).max(1e-6)
}

fn rmse(pred: impl Fn(&[f64]) -> Result<f64>, test: &Dataset) -> Result<f64> {
    let mut sse = 0.0;
    for i in 0..test.n() {
        sse += (pred(test.row(i))? - test.y()[i]).powi(2);
    }
    Ok((sse / test.n() as f64).sqrt())
}

/// Cross-validates, refits with the selected cell and scores on `test`.
fn evaluate(
    cfg: &TradeoffConfig,
    train: &Dataset,
    test: &Dataset,
    method: Method,
    size: usize,
    seed: u64,
) -> Result<Vec<Value>> {
    let predictor = match method {
        Method::Subsampling => CvPredictor::Subsampled {
            s: size,
            convention: cfg.convention,
        },
        Method::Nystrom => CvPredictor::Nystrom { m: size },
        Method::Rfe => CvPredictor::Rfe { features: size },
    };
    let start = Instant::now();
    let report = kfold_grid_select(train, &cfg.grid, cfg.kernel, predictor, cfg.folds, seed)?;
    let cv_ms = millis(start);
    let best = report.selected_hyper();
    let kernel = cfg.kernel.with_bandwidth(best.bandwidth);
    let nu2 = best.noise_variance;

    let (fit_ms, predict_ms, test_rmse) = match method {
        Method::Subsampling => {
            let lambda = cfg.convention.lambda(nu2, train.n(), size);
            let start = Instant::now();
            let model = SubsampleModel::fit(train, kernel, lambda, size, seed)?;
            let fit_ms = millis(start);
            let start = Instant::now();
            let e = rmse(|x| model.predict_mean(x), test)?;
            (fit_ms, millis(start), e)
        }
        Method::Nystrom => {
            let start = Instant::now();
            let model = NystromModel::fit(train, kernel, nu2, size, seed)?;
            let fit_ms = millis(start);
            let start = Instant::now();
            let e = rmse(|x| model.predict(x), test)?;
            (fit_ms, millis(start), e)
        }
        Method::Rfe => {
            let start = Instant::now();
            let model = RfeModel::fit(train, kernel, nu2, size, seed)?;
            let fit_ms = millis(start);
            let start = Instant::now();
            let e = rmse(|x| model.predict(x), test)?;
            (fit_ms, millis(start), e)
        }
    };
    Ok(vec![
        method.name().into(),
        size.into(),
        fit_ms.into(),
        cv_ms.into(),
        predict_ms.into(),
        test_rmse.into(),
        seed.into(),
        nu2.into(),
        best.bandwidth.into(),
    ])
}

pub fn run(cfg: &TradeoffConfig) -> Result<Table> {
    let (train, test) = cfg.source.load_split(cfg.test_size, cfg.seed)?;
    let fold_train = train.n() - train.n().div_ceil(cfg.folds);
    if let Some(&s) = cfg.s_grid.iter().find(|&&s| s > fold_train) {
        return Err(Error::Input(format!(
            "subsample size {s} exceeds the {fold_train} training points of a CV fold"
        )));
    }
    let mut jobs = Vec::new();
    for trial in 0..cfg.trials {
        for (method, sizes) in [
            (Method::Subsampling, &cfg.s_grid),
            (Method::Nystrom, &cfg.baseline_grid),
            (Method::Rfe, &cfg.baseline_grid),
        ] {
            for &size in sizes {
                jobs.push((trial, method, size));
            }
        }
    }
    let mut table = Table::new(vec![
        "method",
        "size",
        "fit_ms",
        "cv_ms",
        "predict_ms",
        "test_rmse",
        "seed",
        "nu2",
        "h",
        "trial",
    ]);
    // Sequential, so that timings are not skewed by sibling jobs.
    for (row, &(trial, method, size)) in jobs.iter().enumerate() {
        let mut values = evaluate(cfg, &train, &test, method, size, row_seed(cfg.seed, row))?;
        values.push(trial.into());
        table.rows.push(values);
    }
    Ok(table)
}

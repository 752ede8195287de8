//! Distance of the subsampled mean from the true regression function.

use rand::Rng;
use rayon::prelude::*;
use subgpr::data::synthetic_regression;
use subgpr::seed::{derive_seed, rng};
use subgpr::{Error, KernelSpec, LambdaConvention, Result, SubsampleModel, Truth};

use super::*;
use crate::args::GeneralizationArgs;
use crate::output::{Echo, Table, Value};

pub const DEFAULT_TRIALS: usize = 20;
pub const DEFAULT_N_GRID: [usize; 1] = [2000];
pub const DEFAULT_S_GRID: [usize; 3] = [32, 128, 512];
/// Narrow enough to resolve one period of sin(2πx) on [-1, 1].
pub const DEFAULT_BANDWIDTH: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizationConfig {
    pub truth: Truth,
    pub p: usize,
    pub noise: f64,
    pub kernel: KernelSpec,
    pub nu2: f64,
    pub lambda: Option<f64>,
    pub convention: LambdaConvention,
    pub n_grid: Vec<usize>,
    pub s_grid: Vec<usize>,
    pub trials: usize,
    pub queries: usize,
    pub seed: u64,
}

impl GeneralizationConfig {
    pub fn from_args(args: &GeneralizationArgs) -> Result<Self> {
        let c = &args.common;
        if c.dataset.is_some() {
            return Err(Error::Input("generalization needs a synthetic truth".into()));
        }
        if c.n.is_some() {
            return Err(Error::Input("use --n-grid to set sample sizes".into()));
        }
        let Source::Synthetic { truth, p, noise, .. } = Source::resolve(c, Truth::Sin2Pi, 1, 0.0)?
        else {
            unreachable!("no dataset path given");
        };
        if truth.eval(&vec![0.0; p]).is_none() {
            return Err(Error::Input(format!(
                "generalization needs a truth with a closed form, got {truth}"
            )));
        }
        let n_grid = size_grid(&args.n_grid, &DEFAULT_N_GRID, "--n-grid")?;
        let s_grid = size_grid(&c.s_grid, &DEFAULT_S_GRID, "--s-grid")?;
        if s_grid.last() > n_grid.first() {
            return Err(Error::Input("every subsample size must fit the smallest n".into()));
        }
        Ok(GeneralizationConfig {
            truth,
            p,
            noise,
            kernel: single_kernel(&c.kernel, c.h.unwrap_or(DEFAULT_BANDWIDTH))?,
            nu2: positive("--nu2", c.nu2)?,
            lambda: c.lambda.map(|l| positive("--lambda", l)).transpose()?,
            convention: c.lambda_convention,
            n_grid,
            s_grid,
            trials: at_least_one("--trials", c.trials.unwrap_or(DEFAULT_TRIALS))?,
            queries: at_least_one("--queries", args.queries)?,
            seed: c.seed,
        })
    }

    pub fn echo(&self) -> Echo {
        let mut e = Echo::default();
        e.push("command", "generalization");
        e.push("synthetic", self.truth);
        e.push("p", self.p);
        e.push("noise", self.noise);
        e.push("kernel", self.kernel);
        echo_common(&mut e, self.lambda, self.nu2, self.convention);
        e.push("n_grid", join(&self.n_grid));
        e.push("s_grid", join(&self.s_grid));
        e.push("trials", self.trials);
        e.push("queries", self.queries);
        e
    }
}

pub fn run(cfg: &GeneralizationConfig) -> Result<Table> {
    let jobs: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |t| (n, t)))
        .collect();
    let blocks: Vec<Vec<Vec<Value>>> = jobs
        .par_iter()
        .enumerate()
        .map(|(job, &(n, trial))| {
            let seed = row_seed(cfg.seed, job);
            let syn = synthetic_regression(cfg.truth, n, cfg.noise, cfg.p, seed)?;
            let mut r = rng(derive_seed(seed, 1));
            let queries: Vec<Vec<f64>> = (0..cfg.queries)
                .map(|_| (0..cfg.p).map(|_| r.random_range(-1.0..=1.0)).collect())
                .collect();
            let truth: Vec<f64> = queries
                .iter()
                .map(|x| cfg.truth.eval(x).expect("checked when resolving the config"))
                .collect();
            cfg.s_grid
                .iter()
                .map(|&s| {
                    let lam = subsample_lambda(cfg.lambda, cfg.nu2, cfg.convention, n, s);
                    let model = SubsampleModel::fit(&syn.data, cfg.kernel, lam, s, derive_seed(seed, s as u64 + 2))?;
                    let errs: Vec<f64> = queries
                        .iter()
                        .zip(&truth)
                        .map(|(x, f)| Ok((model.predict_mean(x)? - f).abs()))
                        .collect::<Result<_>>()?;
                    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
                    Ok(vec![
                        n.into(),
                        s.into(),
                        trial.into(),
                        seed.into(),
                        median(errs).into(),
                        mean.into(),
                    ])
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<Vec<Value>> = blocks.into_iter().flatten().collect();
    // Jobs run n-major, trial-minor; reorder to (n, s, trial).
    rows.sort_by_key(|r| {
        let int = |v: &Value| match v {
            Value::Int(i) => *i,
            _ => 0,
        };
        (int(&r[0]), int(&r[1]), int(&r[2]))
    });
    Ok(Table {
        columns: vec!["n", "s", "trial", "seed", "median_abs_err", "mean_abs_err"],
        rows,
    })
}

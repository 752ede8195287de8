//! Aligned cut distance between a random sign matrix and its subsamples.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use subgpr::graphon::subsample_cut_distance;
use subgpr::seed::{derive_seed, rng};
use subgpr::subsampling::sample_indices;
use subgpr::{Error, Result};

use super::*;
use crate::args::CutnormArgs;
use crate::output::{Echo, Table};

pub const DEFAULT_N: usize = 8;
pub const DEFAULT_TRIALS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct CutnormConfig {
    pub n: usize,
    pub s_grid: Vec<usize>,
    pub trials: usize,
    pub align_budget: usize,
    pub seed: u64,
}

impl CutnormConfig {
    pub fn from_args(args: &CutnormArgs) -> Result<Self> {
        let c = &args.common;
        if c.dataset.is_some() || c.synthetic.is_some() {
            return Err(Error::Input("cutnorm-verify draws its own sign matrix".into()));
        }
        let n = at_least_one("--n", c.n.unwrap_or(DEFAULT_N))?;
        let default: Vec<usize> = (2.min(n)..=n).collect();
        let s_grid = size_grid(&c.s_grid, &default, "--s-grid")?;
        if let Some(&s) = s_grid.iter().find(|&&s| s > n) {
            return Err(Error::Input(format!("subsample size {s} exceeds n={n}")));
        }
        Ok(CutnormConfig {
            n,
            s_grid,
            trials: at_least_one("--trials", c.trials.unwrap_or(DEFAULT_TRIALS))?,
            align_budget: at_least_one("--align-budget", args.align_budget)?,
            seed: c.seed,
        })
    }

    pub fn echo(&self) -> Echo {
        let mut e = Echo::default();
        e.push("command", "cutnorm-verify");
        e.push("matrix", "symmetric random sign");
        e.push("n", self.n);
        e.push("s_grid", join(&self.s_grid));
        e.push("trials", self.trials);
        e.push("align_budget", self.align_budget);
        e
    }
}

/// Symmetric matrix with independent `±1` entries on and above the diagonal.
pub fn sign_matrix(n: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = if r.random_bool(0.5) { 1.0 } else { -1.0 };
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

pub fn run(cfg: &CutnormConfig) -> Result<Table> {
    let a = sign_matrix(cfg.n, derive_seed(cfg.seed, DATA_STREAM));
    let jobs: Vec<(usize, usize)> = cfg
        .s_grid
        .iter()
        .flat_map(|&s| (0..cfg.trials).map(move |t| (s, t)))
        .collect();
    let rows = jobs
        .par_iter()
        .enumerate()
        .map(|(row, &(s, trial))| {
            let seed = row_seed(cfg.seed, row);
            let subset = sample_indices(cfg.n, s, seed)?;
            let d = subsample_cut_distance(&a, &subset, cfg.align_budget, seed)?;
            Ok(vec![cfg.n.into(), s.into(), trial.into(), seed.into(), d.into()])
        })
        .collect::<Result<_>>()?;
    Ok(Table {
        columns: vec!["n", "s", "trial", "seed", "distance"],
        rows,
    })
}

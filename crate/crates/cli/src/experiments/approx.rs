//! Approximation error of the subsampled predictor against exact GPR.

use rayon::prelude::*;
use subgpr::gpr::{mean_variance_from_v, normalized_loss};
use subgpr::{Error, ExactGpr, KernelSpec, LambdaConvention, Result, SubsampleModel, Truth};

use super::*;
use crate::args::ApproxErrorArgs;
use crate::output::{Echo, Table};

pub const DEFAULT_TRIALS: usize = 10;
pub const DEFAULT_S_GRID: [usize; 5] = [32, 64, 128, 256, 512];
pub const DEFAULT_N: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxErrorConfig {
    pub source: Source,
    pub kernels: Vec<KernelSpec>,
    pub nu2: f64,
    pub lambda: Option<f64>,
    pub convention: LambdaConvention,
    pub s_grid: Vec<usize>,
    pub trials: usize,
    pub queries: usize,
    pub seed: u64,
    pub max_n: usize,
}

impl ApproxErrorConfig {
    pub fn from_args(args: &ApproxErrorArgs) -> Result<Self> {
        let c = &args.common;
        let kernels = if c.kernel.eq_ignore_ascii_case("all") {
            KERNEL_SWEEP
                .iter()
                .map(|k| KernelSpec::from_name(k, c.h.unwrap_or(DEFAULT_H)))
                .collect::<Result<_>>()?
        } else {
            vec![KernelSpec::from_name(&c.kernel, c.h.unwrap_or(DEFAULT_H))?]
        };
        Ok(ApproxErrorConfig {
            source: Source::resolve(c, Truth::Sin2Pi, DEFAULT_N, 0.1)?,
            kernels,
            nu2: positive("--nu2", c.nu2)?,
            lambda: c.lambda.map(|l| positive("--lambda", l)).transpose()?,
            convention: c.lambda_convention,
            s_grid: size_grid(&c.s_grid, &DEFAULT_S_GRID, "--s-grid")?,
            trials: at_least_one("--trials", c.trials.unwrap_or(DEFAULT_TRIALS))?,
            queries: at_least_one("--queries", args.queries)?,
            seed: c.seed,
            max_n: c.max_n,
        })
    }

    pub fn echo(&self, kernel: &KernelSpec) -> Echo {
        let mut e = Echo::default();
        e.push("command", "approx-error");
        self.source.echo(&mut e);
        e.push("kernel", kernel);
        echo_common(&mut e, self.lambda, self.nu2, self.convention);
        e.push("s_grid", join(&self.s_grid));
        e.push("trials", self.trials);
        e.push("queries", self.queries);
        e.push("max_n", self.max_n);
        e
    }
}

/// Exact quantities at one query point.
struct Reference {
    x: Vec<f64>,
    k_sup: f64,
    mean: f64,
    variance: f64,
    loss: f64,
}

pub fn run(cfg: &ApproxErrorConfig, kernel: KernelSpec) -> Result<Table> {
    let (train, test) = cfg.source.load_split(cfg.queries, cfg.seed)?;
    let n = train.n();
    check_exact_size(n, cfg.max_n)?;
    if let Some(&s) = cfg.s_grid.iter().find(|&&s| s > n) {
        return Err(Error::Input(format!("subsample size {s} exceeds training size {n}")));
    }
    let lambda = cfg.lambda.unwrap_or(cfg.nu2 / n as f64);
    let exact = ExactGpr::fit(&train, kernel, lambda * n as f64)?;
    let refs: Vec<Reference> = (0..test.n())
        .into_par_iter()
        .map(|i| {
            let x = test.row(i).to_vec();
            let k = exact.cross(&x)?;
            let v = exact.normalized_solution(&k);
            let p = mean_variance_from_v(&v, train.y(), &k, kernel.value(&x, &x))?;
            let loss = normalized_loss(exact.gram(), &k, lambda, &v)?;
            Ok(Reference {
                x,
                k_sup: k.amax(),
                mean: p.mean,
                variance: p.variance,
                loss,
            })
        })
        .collect::<Result<_>>()?;
    let k_max = exact.gram().amax();
    let k_query_max = refs.iter().map(|r| r.k_sup).fold(0.0, f64::max);

    let jobs: Vec<(usize, usize)> = cfg
        .s_grid
        .iter()
        .flat_map(|&s| (0..cfg.trials).map(move |t| (s, t)))
        .collect();
    let name = cfg.source.name();
    let rows = jobs
        .par_iter()
        .enumerate()
        .map(|(row, &(s, trial))| {
            let seed = row_seed(cfg.seed, row);
            let lam = subsample_lambda(cfg.lambda, cfg.nu2, cfg.convention, n, s);
            let model = SubsampleModel::fit(&train, kernel, lam, s, seed)?;
            let (mut mean_err, mut var_err, mut loss_err, mut v_max) = (0.0, 0.0, 0.0, 0.0f64);
            for r in &refs {
                let sol = model.solve(&r.x)?;
                let p = model.predict_from(&sol);
                let loss = model.restricted_loss(&sol.k_s, &sol.v_tilde)?;
                mean_err += (p.mean - r.mean).abs();
                var_err += (p.variance - r.variance).abs();
                loss_err += (loss - r.loss).abs();
                v_max = v_max.max(sol.v_tilde.amax());
            }
            let q = refs.len() as f64;
            Ok(vec![
                name.clone().into(),
                kernel.name().into(),
                s.into(),
                trial.into(),
                seed.into(),
                (mean_err / q).into(),
                (var_err / q).into(),
                (loss_err / q).into(),
                k_max.into(),
                k_query_max.into(),
                v_max.into(),
            ])
        })
        .collect::<Result<_>>()?;
    Ok(Table {
        columns: vec![
            "dataset",
            "kernel",
            "s",
            "trial",
            "seed",
            "mean_err",
            "var_err",
            "loss_err",
            "k_max",
            "k_query_max",
            "v_max",
        ],
        rows,
    })
}

//! Experiment runners. Each turns resolved flags into a [`Table`].

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use subgpr::data::{parse_libsvm, synthetic_regression};
use subgpr::seed::derive_seed;
use subgpr::{Dataset, Error, KernelSpec, LambdaConvention, Result, Scaler, Truth};

pub(crate) use crate::args::DEFAULT_H;
use crate::args::Common;
use crate::output::Echo;

pub mod approx;
pub mod cutnorm;
pub mod cv;
pub mod generalization;
pub mod theorem;
pub mod tradeoff;

/// The five kernels of the kernel sweep, in output order.
pub const KERNEL_SWEEP: [&str; 5] = ["laplacian", "linear", "polynomial", "rbf", "sigmoid"];

/// Stream index reserved for drawing the dataset itself.
pub(crate) const DATA_STREAM: u64 = 0;
/// Stream index reserved for the train/test split.
pub(crate) const SPLIT_STREAM: u64 = 1;

/// Seed for the `row`-th randomized row.
pub(crate) fn row_seed(master: u64, row: usize) -> u64 {
    derive_seed(master, row as u64 + 2)
}

/// Where the data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    File(PathBuf),
    Synthetic {
        truth: Truth,
        n: usize,
        p: usize,
        noise: f64,
    },
}

impl Source {
    pub(crate) fn resolve(common: &Common, truth: Truth, n: usize, noise: f64) -> Result<Source> {
        if let Some(path) = &common.dataset {
            return Ok(Source::File(path.clone()));
        }
        let noise = common.noise.unwrap_or(noise);
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(Error::Input(format!("--noise must be nonnegative, got {noise}")));
        }
        let n = common.n.unwrap_or(n);
        if n == 0 || common.p == 0 {
            return Err(Error::Input("--n and --p must be positive".into()));
        }
        Ok(Source::Synthetic {
            truth: common.synthetic.unwrap_or(truth),
            n,
            p: common.p,
            noise,
        })
    }

    /// Short label for the `dataset` column.
    pub fn name(&self) -> String {
        match self {
            Source::File(path) => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
            Source::Synthetic { truth, .. } => truth.to_string(),
        }
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self, Source::Synthetic { .. })
    }

    pub(crate) fn echo(&self, e: &mut Echo) {
        match self {
            Source::File(path) => e.push("dataset", path.display()),
            Source::Synthetic { truth, n, p, noise } => {
                e.push("synthetic", truth);
                e.push("n", n);
                e.push("p", p);
                e.push("noise", noise);
            }
        }
    }

    /// Reads the file, or draws `n + extra` synthetic samples.
    pub(crate) fn load(&self, extra: usize, seed: u64) -> Result<Dataset> {
        match self {
            Source::File(path) => {
                let file = File::open(path)
                    .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
                parse_libsvm(BufReader::new(file))
            }
            Source::Synthetic { truth, n, p, noise } => {
                Ok(synthetic_regression(*truth, n + extra, *noise, *p, seed)?.data)
            }
        }
    }

    /// Loads and splits off `test` samples. Files are min-max scaled with
    /// a scaler fitted on the training part.
    pub(crate) fn load_split(&self, test: usize, master: u64) -> Result<(Dataset, Dataset)> {
        let data = self.load(test, derive_seed(master, DATA_STREAM))?;
        if data.n() <= test {
            return Err(Error::Input(format!(
                "dataset has {} samples; need more than the {test} held out",
                data.n()
            )));
        }
        let (train, test) = data.train_test_split(test, derive_seed(master, SPLIT_STREAM))?;
        if self.is_synthetic() {
            return Ok((train, test));
        }
        let scaler = Scaler::fit(&train);
        Ok((scaler.apply(&train)?, scaler.apply(&test)?))
    }

    /// Loads the whole dataset, scaling files to `[-1, 1]`.
    pub(crate) fn load_all(&self, master: u64) -> Result<Dataset> {
        let data = self.load(0, derive_seed(master, DATA_STREAM))?;
        if self.is_synthetic() {
            Ok(data)
        } else {
            Scaler::fit(&data).apply(&data)
        }
    }
}

/// Parses `--kernel`, rejecting `all` where a single kernel is needed.
pub(crate) fn single_kernel(name: &str, h: f64) -> Result<KernelSpec> {
    if name.eq_ignore_ascii_case("all") {
        return Err(Error::Input("--kernel all is only supported by approx-error".into()));
    }
    KernelSpec::from_name(name, h)
}

/// Sorted, deduplicated, positive sizes.
pub(crate) fn size_grid(flag: &Option<Vec<usize>>, default: &[usize], what: &str) -> Result<Vec<usize>> {
    let mut grid = flag.clone().unwrap_or_else(|| default.to_vec());
    grid.sort_unstable();
    grid.dedup();
    if grid.is_empty() || grid[0] == 0 {
        return Err(Error::Input(format!("{what} must list positive integers")));
    }
    Ok(grid)
}

pub(crate) fn positive(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Input(format!("{what} must be a positive real, got {v}")))
    }
}

pub(crate) fn at_least_one(what: &str, v: usize) -> Result<usize> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(Error::Input(format!("{what} must be at least 1")))
    }
}

/// `λ` for a size-`s` subsample of `n` points: the fixed `--lambda`, or
/// `ν²` through the convention.
pub(crate) fn subsample_lambda(
    lambda: Option<f64>,
    nu2: f64,
    convention: LambdaConvention,
    n: usize,
    s: usize,
) -> f64 {
    lambda.unwrap_or_else(|| convention.lambda(nu2, n, s))
}

pub(crate) fn check_exact_size(n: usize, max_n: usize) -> Result<()> {
    if n > max_n {
        Err(Error::Size(format!(
            "exact GPR on n={n} exceeds the limit of {max_n}; raise it with --max-n"
        )))
    } else {
        Ok(())
    }
}

pub(crate) fn echo_common(e: &mut Echo, lambda: Option<f64>, nu2: f64, convention: LambdaConvention) {
    e.push("nu2", nu2);
    match lambda {
        Some(l) => e.push("lambda", l),
        None => e.push("lambda", "derived"),
    }
    e.push("lambda_convention", convention);
}

pub(crate) fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

pub(crate) fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

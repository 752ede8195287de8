//! Command-line flags.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use subgpr::{LambdaConvention, Truth};

/// Noise variance used when `--nu2` is absent.
pub const DEFAULT_NU2: f64 = 0.01;
/// Kernel bandwidth used when `--h` is absent.
pub const DEFAULT_H: f64 = 10.0;
pub const DEFAULT_MAX_N: usize = 10_000;

#[derive(Debug, Parser)]
#[command(name = "subgpr", version, about = "Seeded experiments for subsampled Gaussian process regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Error of the subsampled predictor against exact GPR, per subsample size.
    ApproxError(ApproxErrorArgs),
    /// k-fold CV error surfaces over (nu2, h) for subsampled and exact GPR.
    CvGrid(CvGridArgs),
    /// Test error and timing of subsampling, Nystrom and random features.
    Tradeoff(TradeoffArgs),
    /// Aligned cut distance between a matrix and its random subsamples.
    CutnormVerify(CutnormArgs),
    /// How often CV on a subsample ranks two hyperparameters correctly.
    CvTheorem(CvTheoremArgs),
    /// Distance of the subsampled mean from the true regression function.
    Generalization(GeneralizationArgs),
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// libsvm file to read
    #[arg(long, value_name = "PATH", conflicts_with = "synthetic")]
    pub dataset: Option<PathBuf>,
    /// Synthetic truth: sin2pi, gp-sample or gp-sample:<h0>
    #[arg(long, value_name = "NAME")]
    pub synthetic: Option<Truth>,
    /// Synthetic sample size
    #[arg(long)]
    pub n: Option<usize>,
    /// Synthetic input dimension
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    /// Synthetic noise standard deviation
    #[arg(long)]
    pub noise: Option<f64>,
    /// gaussian (rbf), laplacian, linear, polynomial, sigmoid, or `all`
    #[arg(long, default_value = "rbf")]
    pub kernel: String,
    /// Kernel bandwidth [default: 10, generalization: 0.1]
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_NU2)]
    pub nu2: f64,
    /// Fixed lambda, overriding the one derived from nu2
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Comma-separated subsample sizes
    #[arg(long, value_delimiter = ',')]
    pub s_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV (stdout when absent)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Largest n accepted where exact GPR is computed
    #[arg(long, default_value_t = DEFAULT_MAX_N)]
    pub max_n: usize,
    #[arg(long, default_value = "global")]
    pub lambda_convention: LambdaConvention,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridChoice {
    /// nu2, 1/h over {10^(-i/3) : i = 0..11}
    Full,
    /// nu2 over {1, 0.1, 0.01, 0.001}, h over {1, 10, 100, 1000}
    Coarse,
}

#[derive(Debug, Clone, Args)]
pub struct ApproxErrorArgs {
    #[command(flatten)]
    pub common: Common,
    /// Held-out query points per trial
    #[arg(long, default_value_t = 100)]
    pub queries: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CvGridArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = GridChoice::Full)]
    pub grid: GridChoice,
    /// Skip the exact full-sample reference surface
    #[arg(long)]
    pub no_reference: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TradeoffArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated Nystrom ranks and feature counts
    #[arg(long, value_delimiter = ',')]
    pub baseline_grid: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1000)]
    pub test_size: usize,
    #[arg(long, value_enum, default_value_t = GridChoice::Coarse)]
    pub grid: GridChoice,
}

#[derive(Debug, Clone, Args)]
pub struct CutnormArgs {
    #[command(flatten)]
    pub common: Common,
    /// Cut-norm evaluations allowed per alignment search
    #[arg(long, default_value_t = 720)]
    pub align_budget: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CvTheoremArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated holdout sizes
    #[arg(long, value_delimiter = ',')]
    pub q_grid: Option<Vec<usize>>,
    /// First candidate as NU2,H
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 1.0])]
    pub theta1: Vec<f64>,
    /// Second candidate as NU2,H
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 1e4])]
    pub theta2: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct GeneralizationArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated sample sizes
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long, default_value_t = 100)]
    pub queries: usize,
}

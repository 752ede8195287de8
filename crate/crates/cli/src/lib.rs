//! Experiment harness behind the `subgpr` binary.
//!
//! Every subcommand resolves its flags into a config, runs, and writes one
//! CSV (or one per kernel for the kernel sweep) that starts with
//! `# subgpr v1`, the echoed config, and the master seed.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

pub mod args;
pub mod experiments;
pub mod output;

use args::{Cli, Command};
use experiments::{approx, cutnorm, cv, generalization, theorem, tradeoff};
use output::{write_csv, Echo, Table};

#[derive(Debug)]
pub enum CliError {
    Core(subgpr::Error),
    Io(io::Error),
}

impl CliError {
    /// 3 for numerical failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(subgpr::Error::Numerical(_)) => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => e.fmt(f),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<subgpr::Error> for CliError {
    fn from(e: subgpr::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

fn emit(out: Option<&Path>, echo: &Echo, seed: u64, table: &Table) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write_csv(&mut w, echo, seed, table)?;
            w.flush()?;
        }
        None => write_csv(io::stdout().lock(), echo, seed, table)?,
    }
    Ok(())
}

/// `results.csv` becomes `results-laplacian.csv` and so on.
pub fn kernel_path(out: &Path, kernel: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}-{kernel}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{kernel}"),
    };
    out.with_file_name(name)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::ApproxError(a) => {
            let cfg = approx::ApproxErrorConfig::from_args(&a)?;
            let out = a.common.out.as_deref();
            if cfg.kernels.len() == 1 {
                let table = approx::run(&cfg, cfg.kernels[0])?;
                return emit(out, &cfg.echo(&cfg.kernels[0]), cfg.seed, &table);
            }
            let Some(out) = out else {
                return Err(subgpr::Error::Input("--kernel all needs --out".into()).into());
            };
            // Write every kernel that succeeds, then report the first failure.
            let mut first_err = None;
            for (kernel, name) in cfg.kernels.iter().zip(experiments::KERNEL_SWEEP) {
                match approx::run(&cfg, *kernel) {
                    Ok(table) => emit(Some(&kernel_path(out, name)), &cfg.echo(kernel), cfg.seed, &table)?,
                    Err(e) => {
                        eprintln!("{name}: {e}");
                        first_err.get_or_insert(e);
                    }
                }
            }
            first_err.map_or(Ok(()), |e| Err(e.into()))
        }
        Command::CvGrid(a) => {
            let cfg = cv::CvGridConfig::from_args(&a)?;
            emit(a.common.out.as_deref(), &cfg.echo(), cfg.seed, &cv::run(&cfg)?)
        }
        Command::Tradeoff(a) => {
            let cfg = tradeoff::TradeoffConfig::from_args(&a)?;
            emit(a.common.out.as_deref(), &cfg.echo(), cfg.seed, &tradeoff::run(&cfg)?)
        }
        Command::CutnormVerify(a) => {
            let cfg = cutnorm::CutnormConfig::from_args(&a)?;
            emit(a.common.out.as_deref(), &cfg.echo(), cfg.seed, &cutnorm::run(&cfg)?)
        }
        Command::CvTheorem(a) => {
            let cfg = theorem::CvTheoremConfig::from_args(&a)?;
            emit(a.common.out.as_deref(), &cfg.echo(), cfg.seed, &theorem::run(&cfg)?)
        }
        Command::Generalization(a) => {
            let cfg = generalization::GeneralizationConfig::from_args(&a)?;
            emit(a.common.out.as_deref(), &cfg.echo(), cfg.seed, &generalization::run(&cfg)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn flags_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn sweep_paths() {
        assert_eq!(kernel_path(Path::new("out/results.csv"), "rbf"), Path::new("out/results-rbf.csv"));
        assert_eq!(kernel_path(Path::new("results"), "linear"), Path::new("results-linear"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::from(subgpr::Error::Numerical("x".into())).exit_code(), 3);
        assert_eq!(CliError::from(subgpr::Error::Input("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(io::Error::other("x")).exit_code(), 2);
    }
}

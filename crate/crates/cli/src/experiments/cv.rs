//! CV error surfaces over `(ν², h)`.

use subgpr::model_selection::kfold_grid_select;
use subgpr::{CvPredictor, CvReport, Error, HyperGrid, KernelSpec, LambdaConvention, Result, Truth};

use super::*;
use crate::args::{CvGridArgs, GridChoice};
use crate::output::{Echo, Table, Value};

pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_S_GRID: [usize; 3] = [32, 64, 128];
pub const DEFAULT_N: usize = 500;

/// `{1, 0.1, 0.01, 0.001}` for `ν²` and `{1, 10, 100, 1000}` for `h`.
pub fn coarse_grid() -> HyperGrid {
    HyperGrid::new(vec![1.0, 0.1, 0.01, 0.001], vec![1.0, 10.0, 100.0, 1000.0])
        .expect("static grid is valid")
}

pub fn grid_for(choice: GridChoice) -> HyperGrid {
    match choice {
        GridChoice::Full => HyperGrid::log_spaced(),
        GridChoice::Coarse => coarse_grid(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvGridConfig {
    pub source: Source,
    pub kernel: KernelSpec,
    pub grid_choice: GridChoice,
    pub grid: HyperGrid,
    pub convention: LambdaConvention,
    pub s_grid: Vec<usize>,
    pub folds: usize,
    pub reference: bool,
    pub seed: u64,
    pub max_n: usize,
}

impl CvGridConfig {
    pub fn from_args(args: &CvGridArgs) -> Result<Self> {
        let c = &args.common;
        let folds = c.folds.unwrap_or(DEFAULT_FOLDS);
        if folds < 2 {
            return Err(Error::Input("--folds must be at least 2".into()));
        }
        Ok(CvGridConfig {
            source: Source::resolve(c, Truth::Sin2Pi, DEFAULT_N, 0.1)?,
            kernel: single_kernel(&c.kernel, c.h.unwrap_or(DEFAULT_H))?,
            grid_choice: args.grid,
            grid: grid_for(args.grid),
            convention: c.lambda_convention,
            s_grid: size_grid(&c.s_grid, &DEFAULT_S_GRID, "--s-grid")?,
            folds,
            reference: !args.no_reference,
            seed: c.seed,
            max_n: c.max_n,
        })
    }

    pub fn echo(&self) -> Echo {
        let mut e = Echo::default();
        e.push("command", "cv-grid");
        self.source.echo(&mut e);
        e.push("kernel", self.kernel);
        e.push("grid", format!("{:?}", self.grid_choice).to_lowercase());
        e.push("lambda_convention", self.convention);
        e.push("s_grid", join(&self.s_grid));
        e.push("folds", self.folds);
        e.push("reference", self.reference);
        e.push("max_n", self.max_n);
        e
    }
}

fn push_surface(table: &mut Table, label: &str, report: &CvReport) {
    let range = report.range();
    for (a, &nu2) in report.grid.noise_variances().iter().enumerate() {
        for (b, &h) in report.grid.bandwidths().iter().enumerate() {
            table.rows.push(vec![
                Value::from(label),
                nu2.into(),
                h.into(),
                report.errors[a][b].into(),
                (report.selected == (a, b)).into(),
                range.into(),
            ]);
        }
    }
}

pub fn run(cfg: &CvGridConfig) -> Result<Table> {
    let data = cfg.source.load_all(cfg.seed)?;
    let mut table = Table::new(vec!["s", "nu2", "h", "cv_error", "selected", "surface_range"]);
    for &s in &cfg.s_grid {
        let pred = CvPredictor::Subsampled {
            s,
            convention: cfg.convention,
        };
        let report = kfold_grid_select(&data, &cfg.grid, cfg.kernel, pred, cfg.folds, cfg.seed)?;
        push_surface(&mut table, &s.to_string(), &report);
    }
    if cfg.reference {
        check_exact_size(data.n(), cfg.max_n)?;
        let report =
            kfold_grid_select(&data, &cfg.grid, cfg.kernel, CvPredictor::Exact, cfg.folds, cfg.seed)?;
        push_surface(&mut table, "full", &report);
    }
    sort_rows(&mut table);
    Ok(table)
}

/// Orders by subsample size (the full reference last), then `ν²`, then `h`.
fn sort_rows(table: &mut Table) {
    let key = |row: &Vec<Value>| {
        let s = match &row[0] {
            Value::Text(t) => t.parse::<u64>().unwrap_or(u64::MAX),
            _ => u64::MAX,
        };
        let f = |v: &Value| match v {
            Value::Float(x) => *x,
            _ => f64::NAN,
        };
        (s, f(&row[1]), f(&row[2]))
    };
    table.rows.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.total_cmp(&kb.2))
    });
}

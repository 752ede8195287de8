//! Monte Carlo success rate of CV at ranking two hyperparameter pairs.

use subgpr::data::synthetic_regression;
use subgpr::model_selection::{cv_trial_outcomes, CvTrialSetup, Hyper};
use subgpr::seed::derive_seed;
use subgpr::{Error, KernelSpec, LambdaConvention, Result, Truth};

use super::*;
use crate::args::CvTheoremArgs;
use crate::output::{Echo, Table};

pub const DEFAULT_TRIALS: usize = 200;
pub const DEFAULT_N: usize = 2000;
pub const DEFAULT_S_GRID: [usize; 1] = [256];
pub const DEFAULT_Q_GRID: [usize; 4] = [20, 80, 200, 320];

#[derive(Debug, Clone, PartialEq)]
pub struct CvTheoremConfig {
    pub source: Source,
    pub kernel: KernelSpec,
    pub theta1: Hyper,
    pub theta2: Hyper,
    pub convention: LambdaConvention,
    pub s_grid: Vec<usize>,
    pub q_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

impl CvTheoremConfig {
    pub fn from_args(args: &CvTheoremArgs) -> Result<Self> {
        let c = &args.common;
        let source = Source::resolve(c, Truth::GpSample { h0: 1.0 }, DEFAULT_N, 0.1)?;
        if !source.is_synthetic() {
            return Err(Error::Input("cv-theorem needs a synthetic generator".into()));
        }
        let pair = |v: &[f64]| match v {
            [nu2, h] => Hyper::new(*nu2, *h),
            _ => Err(Error::Input(format!("expected NU2,H, got {} values", v.len()))),
        };
        Ok(CvTheoremConfig {
            source,
            kernel: single_kernel(&c.kernel, c.h.unwrap_or(DEFAULT_H))?,
            theta1: pair(&args.theta1)?,
            theta2: pair(&args.theta2)?,
            convention: c.lambda_convention,
            s_grid: size_grid(&c.s_grid, &DEFAULT_S_GRID, "--s-grid")?,
            q_grid: size_grid(&args.q_grid, &DEFAULT_Q_GRID, "--q-grid")?,
            trials: at_least_one("--trials", c.trials.unwrap_or(DEFAULT_TRIALS))?,
            seed: c.seed,
        })
    }

    pub fn echo(&self) -> Echo {
        let mut e = Echo::default();
        e.push("command", "cv-theorem");
        self.source.echo(&mut e);
        e.push("kernel", self.kernel.name());
        e.push("theta1", format!("{},{}", self.theta1.noise_variance, self.theta1.bandwidth));
        e.push("theta2", format!("{},{}", self.theta2.noise_variance, self.theta2.bandwidth));
        e.push("lambda_convention", self.convention);
        e.push("s_grid", join(&self.s_grid));
        e.push("q_grid", join(&self.q_grid));
        e.push("trials", self.trials);
        e
    }
}

pub fn run(cfg: &CvTheoremConfig) -> Result<Table> {
    let Source::Synthetic { truth, n, p, noise } = cfg.source.clone() else {
        return Err(Error::Input("cv-theorem needs a synthetic generator".into()));
    };
    let generate = move |seed| Ok(synthetic_regression(truth, n, noise, p, seed)?.data);
    // Every (s, q) cell reuses the same trial seeds, so datasets and draws
    // are shared across cells and only the sizes differ.
    let trial_seed = derive_seed(cfg.seed, SPLIT_STREAM);
    let mut table = Table::new(vec!["s", "q", "trial", "seed", "cv1", "cv2", "success"]);
    for &s in &cfg.s_grid {
        for &q in &cfg.q_grid {
            let setup = CvTrialSetup {
                kernel: cfg.kernel,
                theta1: cfg.theta1,
                theta2: cfg.theta2,
                s,
                q,
                convention: cfg.convention,
            };
            let outcomes = cv_trial_outcomes(&setup, generate, cfg.trials, trial_seed)?;
            for (t, o) in outcomes.iter().enumerate() {
                table.rows.push(vec![
                    s.into(),
                    q.into(),
                    t.into(),
                    derive_seed(trial_seed, 2 * t as u64).into(),
                    o.cv1.into(),
                    o.cv2.into(),
                    o.success().into(),
                ]);
            }
        }
    }
    Ok(table)
}

/// Success frequency per `(s, q)` cell of a cv-theorem table.
pub fn success_rates(table: &Table) -> Vec<(u64, u64, f64)> {
    use crate::output::Value;
    let mut out: Vec<(u64, u64, usize, usize)> = Vec::new();
    for row in &table.rows {
        let (Value::Int(s), Value::Int(q), Value::Bool(ok)) = (&row[0], &row[1], &row[6]) else {
            continue;
        };
        match out.iter_mut().find(|c| c.0 == *s && c.1 == *q) {
            Some(c) => {
                c.2 += usize::from(*ok);
                c.3 += 1;
            }
            None => out.push((*s, *q, usize::from(*ok), 1)),
        }
    }
    out.into_iter()
        .map(|(s, q, ok, total)| (s, q, ok as f64 / total as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::output::Value;

    #[test]
    fn rates_per_cell() {
        let mut t = Table::new(vec!["s", "q", "trial", "seed", "cv1", "cv2", "success"]);
        for (q, ok) in [(10usize, true), (10, false), (20, true), (10, true)] {
            t.rows.push(vec![
                5usize.into(),
                q.into(),
                0usize.into(),
                0u64.into(),
                1.0.into(),
                2.0.into(),
                Value::Bool(ok),
            ]);
        }
        let rates = success_rates(&t);
        assert_eq!(rates, [(5, 10, 2.0 / 3.0), (5, 20, 1.0)]);
    }
}

//! Experiment runners. Each validates its configuration, runs the trials
//! and, when an output path is set, writes one table per estimator.

mod gaussian;
mod grid;
mod sample;
mod timing;

pub use gaussian::{fit_expansion, run_gaussian_validation, wishart_covariance, Comparison, GaussianReport};
pub use grid::{bump_density, run_grid_study, GridCell, GridStudyResult};
pub use sample::{run_lambda_sweep, run_sample_complexity, PointResult, Readout, SweepResult, TrialRecord};
pub use timing::{run_timing_frontier, FrontierRow, TimingResult};

use rayon::prelude::*;

use crate::config::output_for;
use crate::table::Table;
use crate::{Estimator, ExperimentConfig, Result};

/// Regularization minimizing each error, recorded per sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaStar {
    pub estimator: Estimator,
    /// The `n` or `h` the choice was made at.
    pub at: f64,
    pub by_cost: f64,
    pub by_potentials: f64,
}

/// Runs `f` on every trial index. Trials may run concurrently; results come
/// back in trial order.
pub(crate) fn run_trials<T: Send>(trials: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..trials).into_par_iter().map(f).collect()
}

/// Arg-min over `(key, error)` pairs; the first minimum wins.
pub(crate) fn argmin(pairs: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let mut best = (f64::NAN, f64::INFINITY);
    for (k, e) in pairs {
        if e < best.1 {
            best = (k, e);
        }
    }
    best.0
}

pub(crate) fn write_tables(cfg: &ExperimentConfig, tables: &[(Estimator, Table)]) -> Result<()> {
    if let Some(base) = &cfg.output_path {
        for (e, t) in tables {
            t.write(&output_for(base, *e))?;
        }
    }
    Ok(())
}

/// Comment line shared by all tables of a run.
pub(crate) fn describe(cfg: &ExperimentConfig, estimator: Estimator) -> String {
    format!(
        "experiment={} estimator={} d={} trials={} seed={} law={:?} same_distribution={} identical_samples={} beta={} aspect={} marginal_tol={:e} max_iters={} anderson_depth={}",
        cfg.experiment.name(),
        estimator,
        cfg.d,
        cfg.trials,
        cfg.seed,
        cfg.law,
        cfg.same_distribution,
        cfg.identical_samples,
        cfg.beta,
        cfg.aspect,
        cfg.solver.marginal_tol,
        cfg.solver.max_iters,
        cfg.solver.anderson_depth,
    )
}

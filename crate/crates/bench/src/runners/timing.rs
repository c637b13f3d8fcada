//! Best solver time reaching a target potential error.

use std::time::Duration;

use crate::runners::{describe, write_tables};
use crate::setup::PairSetup;
use crate::table::{Cell, Table};
use crate::trial::{evaluate_timed, PluginChoice, Reference};
use crate::{BenchError, Estimator, Experiment, ExperimentConfig, Result};

/// Mean time and potential error of one estimator at one `(n, λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub estimator: Estimator,
    pub n: usize,
    pub lambda: f64,
    pub seconds: f64,
    pub potential_error: f64,
}

/// Cheapest grid point meeting a target, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierRow {
    pub estimator: Estimator,
    pub target: f64,
    pub best: Option<GridPoint>,
}

#[derive(Debug, Clone)]
pub struct TimingResult {
    pub grid: Vec<GridPoint>,
    pub frontier: Vec<FrontierRow>,
    pub tables: Vec<(Estimator, Table)>,
}

impl TimingResult {
    pub fn unreachable(&self) -> usize {
        self.frontier.iter().filter(|r| r.best.is_none()).count()
    }
}

/// Evaluates every `(n, λ)` of the grid (no early stopping), trials run one
/// at a time so timings do not contend, then picks for each target the
/// smallest mean time among points whose mean potential error meets it.
/// Unreachable targets keep an empty row with `reached = 0`.
pub fn run_timing_frontier(cfg: &ExperimentConfig) -> Result<TimingResult> {
    cfg.validate()?;
    if cfg.experiment != Experiment::TimingFrontier {
        return Err(BenchError::Config(format!("{} is not a timing frontier", cfg.experiment.name())));
    }
    let setup = PairSetup::from_config(cfg)?;
    let plugin = PluginChoice::from_config(cfg);
    let mut ns = cfg.n_list.clone();
    ns.sort_unstable();
    ns.dedup();
    let mut lambdas = cfg.lambda_list.clone();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();

    let mut grid = Vec::new();
    for &n in &ns {
        for &e in &cfg.estimators {
            let lambda_grid: &[f64] = if e.regularized() { &lambdas } else { &lambdas[..1] };
            for &lambda in lambda_grid {
                let solver = cfg.solver_at(lambda);
                let mut time = Duration::ZERO;
                let mut error = 0.0;
                for trial in 0..cfg.trials {
                    let draw = setup.draw(n, trial, cfg.eval_points)?;
                    let values: Vec<f64> = draw.eval.iter_points().map(|x| setup.potential.eval(x)).collect();
                    let reference = Reference {
                        eval: &draw.eval,
                        values: &values,
                    };
                    let o = evaluate_timed(&draw.mu, &draw.nu, reference, e, &solver, plugin)?;
                    time += o.wall_time.expect("timed outcome");
                    error += o.potential_error;
                }
                grid.push(GridPoint {
                    estimator: e,
                    n,
                    lambda: if e.regularized() { lambda } else { plugin.lambda() },
                    seconds: time.as_secs_f64() / cfg.trials as f64,
                    potential_error: error / cfg.trials as f64,
                });
            }
        }
    }

    let mut targets = cfg.targets.clone();
    targets.sort_by(|a, b| b.total_cmp(a));
    let mut frontier = Vec::new();
    for &e in &cfg.estimators {
        for &target in &targets {
            let best = grid
                .iter()
                .filter(|p| p.estimator == e && p.potential_error <= target)
                .min_by(|a, b| a.seconds.total_cmp(&b.seconds))
                .copied();
            frontier.push(FrontierRow { estimator: e, target, best });
        }
    }

    let mut tables = Vec::new();
    for &e in &cfg.estimators {
        let mut t = Table {
            header: ["target", "time_seconds", "Nsamples", "blur", "error_on_potentials", "reached"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            ..Table::default()
        };
        t.comment("ground_truth=quadratic_brenier gauge=mean_zero time=solver_only");
        t.comment(describe(cfg, e));
        t.comment("unreachable targets have reached=0 and NaN entries");
        for r in frontier.iter().filter(|r| r.estimator == e) {
            t.rows.push(match r.best {
                Some(p) => vec![
                    Cell::Float(r.target),
                    Cell::Float(p.seconds),
                    Cell::Int(p.n as u64),
                    Cell::Float(p.lambda),
                    Cell::Float(p.potential_error),
                    Cell::Int(1),
                ],
                None => vec![
                    Cell::Float(r.target),
                    Cell::Float(f64::NAN),
                    Cell::Float(f64::NAN),
                    Cell::Float(f64::NAN),
                    Cell::Float(f64::NAN),
                    Cell::Int(0),
                ],
            });
        }
        tables.push((e, t));
    }
    write_tables(cfg, &tables)?;
    Ok(TimingResult { grid, frontier, tables })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(Experiment::TimingFrontier);
        cfg.d = 2;
        cfg.n_list = vec![20, 40];
        cfg.lambda_list = vec![0.3, 1.0];
        cfg.trials = 2;
        cfg.eval_points = 40;
        cfg
    }

    #[test]
    fn loose_targets_are_met_at_the_smallest_n() {
        let mut cfg = small();
        cfg.targets = vec![1e3];
        let r = run_timing_frontier(&cfg).unwrap();
        assert_eq!(r.unreachable(), 0);
        assert_eq!(r.grid.len(), 2 * 3 * 2);
        for row in &r.frontier {
            let best = row.best.unwrap();
            let cheapest = r
                .grid
                .iter()
                .filter(|p| p.estimator == row.estimator)
                .map(|p| p.seconds)
                .fold(f64::INFINITY, f64::min);
            assert_eq!(best.seconds, cheapest);
        }
    }

    #[test]
    fn unreachable_targets_are_flagged() {
        let mut cfg = small();
        cfg.targets = vec![1e-12];
        cfg.estimators = vec![Estimator::S];
        let r = run_timing_frontier(&cfg).unwrap();
        assert_eq!(r.unreachable(), 1);
        let text = r.tables[0].1.render();
        assert!(text.lines().last().unwrap().ends_with(" 0"));
    }

    #[test]
    fn single_point_grid_is_its_own_frontier() {
        let mut cfg = small();
        cfg.n_list = vec![30];
        cfg.lambda_list = vec![0.5];
        cfg.estimators = vec![Estimator::T];
        cfg.targets = vec![1e3];
        let r = run_timing_frontier(&cfg).unwrap();
        assert_eq!(r.grid.len(), 1);
        assert_eq!(r.frontier[0].best.unwrap(), r.grid[0]);
    }
}

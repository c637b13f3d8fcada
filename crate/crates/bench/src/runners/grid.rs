//! Discretized densities on the circle against an exact fine-grid reference.

use std::f64::consts::TAU;

use w2est::exact1d::w2sq_circle;
use w2est::measures::{discretize_density, DiscreteMeasure, GridSpec};

use crate::config::grid_resolution;
use crate::runners::{argmin, describe, write_tables, LambdaStar};
use crate::table::{Cell, ResultRow, Table};
use crate::trial::{evaluate, PluginChoice, Reference, CUT_RESOLUTION};
use crate::{BenchError, Estimator, Experiment, ExperimentConfig, Result};

/// Quadrature nodes per cell when discretizing.
const NODES_PER_CELL: usize = 8;
/// The reference grid is this many times finer than the finest grid studied.
const REFERENCE_REFINEMENT: usize = 8;

/// Unnormalized smooth positive densities with Lipschitz logarithms:
/// index 0 is `exp(0.8 cos 2πx)`, index 1 a shifted bump with a second
/// harmonic.
pub fn bump_density(index: usize) -> impl Fn(&[f64]) -> f64 {
    move |x: &[f64]| {
        let t = x[0];
        if index == 0 {
            (0.8 * (TAU * t).cos()).exp()
        } else {
            (0.5 * (TAU * (t - 0.35)).cos() + 0.3 * (2.0 * TAU * t).sin()).exp()
        }
    }
}

/// One estimator at one `(h, λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub h: f64,
    pub lambda: f64,
    pub estimator: Estimator,
    pub value: f64,
    pub cost_error: f64,
    pub potential_error: f64,
}

#[derive(Debug, Clone)]
pub struct GridStudyResult {
    /// `W₂²` on the reference grid.
    pub reference: f64,
    pub reference_resolution: usize,
    pub cells: Vec<GridCell>,
    /// Per `h`, the λ minimizing each error.
    pub lambda_star: Vec<LambdaStar>,
    pub tables: Vec<(Estimator, Table)>,
}

impl GridStudyResult {
    pub fn cell(&self, estimator: Estimator, h: f64, lambda: f64) -> Option<&GridCell> {
        self.cells
            .iter()
            .find(|c| c.estimator == estimator && c.h == h && (c.lambda == lambda || !estimator.regularized()))
    }
}

fn pair(m: usize, same: bool) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    let grid = GridSpec::new(m, 1)?;
    let mu = discretize_density(bump_density(0), grid, NODES_PER_CELL)?;
    let nu = if same {
        mu.clone()
    } else {
        discretize_density(bump_density(1), grid, NODES_PER_CELL)?
    };
    Ok((mu, nu))
}

/// Grid study on the circle: for every `h` and λ, cost and potential errors
/// of each estimator against the exact transport between the densities.
/// Runs are deterministic, so `trials` is ignored and the std columns are 0.
pub fn run_grid_study(cfg: &ExperimentConfig) -> Result<GridStudyResult> {
    cfg.validate()?;
    if cfg.experiment != Experiment::GridStudy {
        return Err(BenchError::Config(format!("{} is not a grid study", cfg.experiment.name())));
    }
    let mut hs = cfg.h_list.clone();
    hs.sort_by(|a, b| b.total_cmp(a));
    hs.dedup();
    let mut lambdas = cfg.lambda_list.clone();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();

    let finest = hs.iter().map(|&h| grid_resolution(h)).collect::<Result<Vec<_>>>()?.into_iter().max().unwrap();
    let reference_resolution = finest * REFERENCE_REFINEMENT;
    let (mu_ref, nu_ref) = pair(reference_resolution, cfg.same_distribution)?;
    let (reference, potential) = w2sq_circle(&mu_ref, &nu_ref, CUT_RESOLUTION)?;

    let plugin = PluginChoice::from_config(cfg);
    let regularized: Vec<Estimator> = cfg.estimators.iter().copied().filter(|e| e.regularized()).collect();
    let mut cells = Vec::new();
    for &h in &hs {
        let (mu, nu) = pair(grid_resolution(h)?, cfg.same_distribution)?;
        let values: Vec<f64> = mu.iter_points().map(|x| potential.eval(x[0])).collect();
        let refs = Reference {
            eval: &mu,
            values: &values,
        };
        let mut push = |lambda: f64, outcomes: Vec<crate::trial::Outcome>| {
            for o in outcomes {
                cells.push(GridCell {
                    h,
                    lambda,
                    estimator: o.estimator,
                    value: o.value,
                    cost_error: (o.value - reference).abs(),
                    potential_error: o.potential_error,
                });
            }
        };
        if !regularized.is_empty() {
            for &lambda in &lambdas {
                push(lambda, evaluate(&mu, &nu, refs, &regularized, &cfg.solver_at(lambda), plugin)?);
            }
        }
        if cfg.estimators.contains(&Estimator::Plugin) {
            push(plugin.lambda(), evaluate(&mu, &nu, refs, &[Estimator::Plugin], &cfg.solver_at(lambdas[0]), plugin)?);
        }
    }

    let mut lambda_star = Vec::new();
    for &e in &regularized {
        for &h in &hs {
            let at: Vec<&GridCell> = cells.iter().filter(|c| c.estimator == e && c.h == h).collect();
            lambda_star.push(LambdaStar {
                estimator: e,
                at: h,
                by_cost: argmin(at.iter().map(|c| (c.lambda, c.cost_error))),
                by_potentials: argmin(at.iter().map(|c| (c.lambda, c.potential_error))),
            });
        }
    }

    let mut tables = Vec::new();
    for &e in &cfg.estimators {
        let rows: Vec<ResultRow> = cells
            .iter()
            .filter(|c| c.estimator == e)
            .map(|c| {
                let mut row = ResultRow::from_trials(Cell::Float(c.h), &[c.cost_error], &[c.potential_error]);
                row.extra.push(c.lambda);
                row
            })
            .collect();
        let mut t = Table::errors("h", &["blur"], &rows);
        t.comment(format!(
            "ground_truth=exact1d_circle reference_resolution={reference_resolution} w2sq={reference:e} gauge=mean_zero eval=grid_mu"
        ));
        t.comment(describe(cfg, e));
        for s in lambda_star.iter().filter(|s| s.estimator == e) {
            t.comment(format!("lambda_star h={} cost={} potentials={}", s.at, s.by_cost, s.by_potentials));
        }
        tables.push((e, t));
    }
    write_tables(cfg, &tables)?;
    Ok(GridStudyResult {
        reference,
        reference_resolution,
        cells,
        lambda_star,
        tables,
    })
}

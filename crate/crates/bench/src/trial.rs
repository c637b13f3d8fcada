//! Estimator evaluation on one pair of measures.

use std::time::{Duration, Instant};

use w2est::estimators::{
    l1_from_differences, DivergenceOptions, DivergenceProblem, Gauge, PotentialFunction,
};
use w2est::exact1d::{assignment_solve, w2sq_circle, AssignmentPotential, CirclePotential};
use w2est::measures::{DiscreteMeasure, Geometry};
use w2est::sinkhorn::SolverConfig;

use crate::{Estimator, ExperimentConfig, Result};

/// Shift count of the circle cut search used for exact plug-in values.
pub const CUT_RESOLUTION: usize = 256;

/// How the plug-in estimator is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PluginChoice {
    /// Exact optimal transport: assignment for uniform clouds, the cut
    /// search for measures on the circle.
    Exact,
    /// `T_λ` at a small λ.
    Proxy(f64),
}

impl PluginChoice {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        if cfg.plugin_exact {
            PluginChoice::Exact
        } else {
            PluginChoice::Proxy(cfg.plugin_proxy_lambda)
        }
    }

    /// Regularization reported for the plug-in (0 when exact).
    pub fn lambda(self) -> f64 {
        match self {
            PluginChoice::Exact => 0.0,
            PluginChoice::Proxy(l) => l,
        }
    }
}

/// First potential produced by an estimator.
#[derive(Debug, Clone)]
pub enum EstimatedPotential {
    Smooth(PotentialFunction),
    Assignment(AssignmentPotential),
    Circle(CirclePotential),
}

impl EstimatedPotential {
    pub fn eval_measure(&self, points: &DiscreteMeasure) -> Vec<f64> {
        match self {
            EstimatedPotential::Smooth(p) => p.eval_measure(points),
            EstimatedPotential::Assignment(p) => points.iter_points().map(|x| p.eval(x)).collect(),
            EstimatedPotential::Circle(p) => points.iter_points().map(|x| p.eval(x[0])).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub estimator: Estimator,
    pub value: f64,
    /// L¹ distance to the reference potential under the evaluation measure,
    /// after matching means.
    pub potential_error: f64,
    /// Solver time; only set by [`evaluate_timed`].
    pub wall_time: Option<Duration>,
    pub converged: bool,
}

/// Where potentials are compared: a measure and the reference values on
/// its atoms.
#[derive(Debug, Clone, Copy)]
pub struct Reference<'a> {
    pub eval: &'a DiscreteMeasure,
    pub values: &'a [f64],
}

impl Reference<'_> {
    pub fn l1_error(&self, potential: &EstimatedPotential) -> Result<f64> {
        let est = potential.eval_measure(self.eval);
        let diffs: Vec<f64> = est.iter().zip(self.values).map(|(a, b)| a - b).collect();
        Ok(l1_from_differences(&diffs, self.eval.weights(), Gauge::MeanZeroMatch)?)
    }
}

struct Computed {
    estimator: Estimator,
    value: f64,
    potential: EstimatedPotential,
    converged: bool,
}

fn plugin_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(f64, EstimatedPotential)> {
    if mu.geometry() == Geometry::Torus && mu.dim() == 1 {
        let (value, potential) = w2sq_circle(mu, nu, CUT_RESOLUTION)?;
        Ok((value, EstimatedPotential::Circle(potential)))
    } else {
        let sol = assignment_solve(mu, nu)?;
        Ok((sol.w2sq, EstimatedPotential::Assignment(sol.potential().clone())))
    }
}

fn compute_plugin(
    problem: Option<&DivergenceProblem>,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cfg: &SolverConfig,
    plugin: PluginChoice,
) -> Result<Computed> {
    let (value, potential, converged) = match plugin {
        PluginChoice::Exact => {
            let (value, potential) = plugin_exact(mu, nu)?;
            (value, potential, true)
        }
        PluginChoice::Proxy(lambda) => {
            let owned;
            let p = match problem {
                Some(p) => p,
                None => {
                    owned = DivergenceProblem::new(mu, nu, DivergenceOptions::default())?;
                    &owned
                }
            };
            let (report, pair) = p.entropic(&cfg.with_lambda(lambda))?;
            (report.value, EstimatedPotential::Smooth(PotentialFunction::biased(&pair)), report.converged)
        }
    };
    Ok(Computed {
        estimator: Estimator::Plugin,
        value,
        potential,
        converged,
    })
}

/// All requested estimators on one pair, sharing solves: `R` reuses the
/// `S_λ` level, which in turn contains `T_λ`. Outcomes follow the order of
/// `estimators`.
pub fn evaluate(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    reference: Reference<'_>,
    estimators: &[Estimator],
    cfg: &SolverConfig,
    plugin: PluginChoice,
) -> Result<Vec<Outcome>> {
    let wants = |e| estimators.contains(&e);
    let needs_problem = [Estimator::T, Estimator::S, Estimator::R].into_iter().any(wants);
    let problem = if needs_problem {
        Some(DivergenceProblem::new(mu, nu, DivergenceOptions::default())?)
    } else {
        None
    };

    let mut computed = Vec::new();
    if let Some(p) = &problem {
        if wants(Estimator::R) {
            let (report, levels) = p.richardson(cfg)?;
            let (fine, _) = report.levels.expect("richardson records its levels");
            computed.push(Computed {
                estimator: Estimator::R,
                value: report.value,
                potential: EstimatedPotential::Smooth(PotentialFunction::from_richardson(&levels)?),
                converged: report.converged,
            });
            computed.push(Computed {
                estimator: Estimator::S,
                value: fine,
                potential: EstimatedPotential::Smooth(PotentialFunction::from_divergence(&levels[0])?),
                converged: report.converged,
            });
            let cross = &levels[0].cross;
            computed.push(Computed {
                estimator: Estimator::T,
                value: cross.value(),
                potential: EstimatedPotential::Smooth(PotentialFunction::biased(cross)),
                converged: cross.solution.converged,
            });
        } else if wants(Estimator::S) {
            let (report, sols) = p.divergence(cfg)?;
            computed.push(Computed {
                estimator: Estimator::S,
                value: report.value,
                potential: EstimatedPotential::Smooth(PotentialFunction::from_divergence(&sols)?),
                converged: report.converged,
            });
            computed.push(Computed {
                estimator: Estimator::T,
                value: sols.cross.value(),
                potential: EstimatedPotential::Smooth(PotentialFunction::biased(&sols.cross)),
                converged: sols.cross.solution.converged,
            });
        } else {
            let (report, pair) = p.entropic(cfg)?;
            computed.push(Computed {
                estimator: Estimator::T,
                value: report.value,
                potential: EstimatedPotential::Smooth(PotentialFunction::biased(&pair)),
                converged: report.converged,
            });
        }
    }
    if wants(Estimator::Plugin) {
        computed.push(compute_plugin(problem.as_ref(), mu, nu, cfg, plugin)?);
    }

    estimators
        .iter()
        .map(|&e| {
            let c = computed.iter().find(|c| c.estimator == e).expect("every requested estimator is computed");
            Ok(Outcome {
                estimator: e,
                value: c.value,
                potential_error: reference.l1_error(&c.potential)?,
                wall_time: None,
                converged: c.converged,
            })
        })
        .collect()
}

/// One estimator on its own, timing cost-matrix setup and solves but not the
/// potential comparison.
pub fn evaluate_timed(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    reference: Reference<'_>,
    estimator: Estimator,
    cfg: &SolverConfig,
    plugin: PluginChoice,
) -> Result<Outcome> {
    let start = Instant::now();
    let computed = match estimator {
        Estimator::Plugin => compute_plugin(None, mu, nu, cfg, plugin)?,
        e => {
            let p = DivergenceProblem::new(mu, nu, DivergenceOptions::default())?;
            let (value, potential, converged) = match e {
                Estimator::T => {
                    let (r, pair) = p.entropic(cfg)?;
                    (r.value, PotentialFunction::biased(&pair), r.converged)
                }
                Estimator::S => {
                    let (r, sols) = p.divergence(cfg)?;
                    (r.value, PotentialFunction::from_divergence(&sols)?, r.converged)
                }
                _ => {
                    let (r, levels) = p.richardson(cfg)?;
                    (r.value, PotentialFunction::from_richardson(&levels)?, r.converged)
                }
            };
            Computed {
                estimator: e,
                value,
                potential: EstimatedPotential::Smooth(potential),
                converged,
            }
        }
    };
    let wall_time = start.elapsed();
    Ok(Outcome {
        estimator,
        value: computed.value,
        potential_error: reference.l1_error(&computed.potential)?,
        wall_time: Some(wall_time),
        converged: computed.converged,
    })
}

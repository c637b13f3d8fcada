//! Random-sampling experiments: error against `n`, and against λ at fixed `n`.

use crate::runners::{argmin, describe, run_trials, write_tables, LambdaStar};
use crate::setup::PairSetup;
use crate::table::{Cell, ResultRow, Table};
use crate::trial::{evaluate, PluginChoice, Reference};
use crate::{BenchError, Estimator, Experiment, ExperimentConfig, Result};

/// What the cost error is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readout {
    /// `|Ŵ₂² − W₂²|`.
    Squared,
    /// `|√max(Ŵ₂², 0) − W₂|`.
    Root,
}

impl Readout {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        if cfg.sqrt_readout {
            Readout::Root
        } else {
            Readout::Squared
        }
    }

    pub fn error(self, estimate: f64, truth: f64) -> f64 {
        match self {
            Readout::Squared => (estimate - truth).abs(),
            Readout::Root => (estimate.max(0.0).sqrt() - truth.max(0.0).sqrt()).abs(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Readout::Squared => "w2sq",
            Readout::Root => "w2",
        }
    }
}

/// One estimator on one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub value: f64,
    pub potential_error: f64,
    pub converged: bool,
}

/// All trials of one estimator at one `(n, λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub n: usize,
    /// Regularization used; for the plug-in, 0 when exact.
    pub lambda: f64,
    pub estimator: Estimator,
    pub records: Vec<TrialRecord>,
}

impl PointResult {
    pub fn cost_errors(&self, readout: Readout, truth: f64) -> Vec<f64> {
        self.records.iter().map(|r| readout.error(r.value, truth)).collect()
    }

    pub fn potential_errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.potential_error).collect()
    }

    pub fn row(&self, x: Cell, readout: Readout, truth: f64) -> ResultRow {
        ResultRow::from_trials(x, &self.cost_errors(readout, truth), &self.potential_errors())
    }

    pub fn mean_value(&self) -> f64 {
        self.records.iter().map(|r| r.value).sum::<f64>() / self.records.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// `W₂²` between the two laws.
    pub truth: f64,
    pub points: Vec<PointResult>,
    pub lambda_star: Vec<LambdaStar>,
    pub tables: Vec<(Estimator, Table)>,
}

impl SweepResult {
    pub fn point(&self, estimator: Estimator, n: usize, lambda: f64) -> Option<&PointResult> {
        self.points
            .iter()
            .find(|p| p.estimator == estimator && p.n == n && (p.lambda == lambda || !estimator.regularized()))
    }

    /// Mean errors of `estimator` across the sample sizes, in increasing `n`.
    pub fn curve(&self, estimator: Estimator, lambda: f64, readout: Readout) -> (Vec<f64>, Vec<f64>) {
        let mut ns: Vec<usize> = self.points.iter().filter(|p| p.estimator == estimator).map(|p| p.n).collect();
        ns.sort_unstable();
        ns.dedup();
        let errs = ns
            .iter()
            .map(|&n| {
                let p = self.point(estimator, n, lambda).expect("point exists for each n");
                p.row(Cell::Int(n as u64), readout, self.truth).error_on_cost
            })
            .collect();
        (ns.iter().map(|&n| n as f64).collect(), errs)
    }
}

/// Trials at sample size `n` over all λ; draws are shared across λ.
fn sweep_at(setup: &PairSetup, cfg: &ExperimentConfig, n: usize, lambdas: &[f64]) -> Result<Vec<PointResult>> {
    let plugin = PluginChoice::from_config(cfg);
    let regularized: Vec<Estimator> = cfg.estimators.iter().copied().filter(|e| e.regularized()).collect();
    let with_plugin = cfg.estimators.contains(&Estimator::Plugin);

    let per_trial = run_trials(cfg.trials, |trial| {
        let draw = setup.draw(n, trial, cfg.eval_points)?;
        let values: Vec<f64> = draw.eval.iter_points().map(|x| setup.potential.eval(x)).collect();
        let reference = Reference {
            eval: &draw.eval,
            values: &values,
        };
        let mut out = Vec::new();
        for &lambda in lambdas {
            if !regularized.is_empty() {
                out.push((lambda, evaluate(&draw.mu, &draw.nu, reference, &regularized, &cfg.solver_at(lambda), plugin)?));
            }
        }
        if with_plugin {
            let cfg0 = cfg.solver_at(lambdas[0]);
            out.push((plugin.lambda(), evaluate(&draw.mu, &draw.nu, reference, &[Estimator::Plugin], &cfg0, plugin)?));
        }
        Ok(out)
    })?;

    let mut points: Vec<PointResult> = Vec::new();
    for trial in per_trial {
        for (lambda, outcomes) in trial {
            for o in outcomes {
                let record = TrialRecord {
                    value: o.value,
                    potential_error: o.potential_error,
                    converged: o.converged,
                };
                match points.iter_mut().find(|p| p.estimator == o.estimator && p.lambda == lambda) {
                    Some(p) => p.records.push(record),
                    None => points.push(PointResult {
                        n,
                        lambda,
                        estimator: o.estimator,
                        records: vec![record],
                    }),
                }
            }
        }
    }
    Ok(points)
}

fn lambda_star_at(points: &[PointResult], estimator: Estimator, at: f64, readout: Readout, truth: f64) -> LambdaStar {
    let rows: Vec<(f64, ResultRow)> = points
        .iter()
        .filter(|p| p.estimator == estimator)
        .map(|p| (p.lambda, p.row(Cell::Float(p.lambda), readout, truth)))
        .collect();
    LambdaStar {
        estimator,
        at,
        by_cost: argmin(rows.iter().map(|(l, r)| (*l, r.error_on_cost))),
        by_potentials: argmin(rows.iter().map(|(l, r)| (*l, r.error_on_potentials))),
    }
}

fn header_comments(t: &mut Table, cfg: &ExperimentConfig, e: Estimator, truth: f64, readout: Readout) {
    let law = match cfg.law {
        crate::Law::Elliptic => "elliptic",
        crate::Law::Gaussian => "gaussian",
    };
    t.comment(format!(
        "ground_truth={law}_bures w2sq={truth:e} potential=quadratic_brenier gauge=mean_zero eval=held_out_mu_{} readout={}",
        cfg.eval_points,
        readout.name()
    ));
    t.comment(describe(cfg, e));
    if e == Estimator::Plugin {
        let plugin = match PluginChoice::from_config(cfg) {
            PluginChoice::Exact => "exact".to_string(),
            PluginChoice::Proxy(l) => format!("proxy_lambda={l}"),
        };
        t.comment(format!("plugin={plugin}"));
    }
}

/// Error against the sample size. With a single λ every row uses it; with
/// several, each row reports the λ minimizing the potential error (the
/// `blur` column), which gives the optimal-λ curve.
pub fn run_sample_complexity(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    if !matches!(cfg.experiment, Experiment::SampleComplexity | Experiment::OptimalLambdaCurve) {
        return Err(BenchError::Config(format!("{} is not a sample-size sweep", cfg.experiment.name())));
    }
    let setup = PairSetup::from_config(cfg)?;
    let readout = Readout::from_config(cfg);
    let mut ns = cfg.n_list.clone();
    ns.sort_unstable();
    ns.dedup();

    let mut points = Vec::new();
    let mut lambda_star = Vec::new();
    for &n in &ns {
        let at_n = sweep_at(&setup, cfg, n, &cfg.lambda_list)?;
        for &e in cfg.estimators.iter().filter(|e| e.regularized()) {
            lambda_star.push(lambda_star_at(&at_n, e, n as f64, readout, setup.w2sq));
        }
        points.extend(at_n);
    }

    let optimal = cfg.lambda_list.len() > 1;
    let mut tables = Vec::new();
    for &e in &cfg.estimators {
        let rows: Vec<ResultRow> = ns
            .iter()
            .map(|&n| {
                let lambda = if !e.regularized() {
                    PluginChoice::from_config(cfg).lambda()
                } else if optimal {
                    lambda_star.iter().find(|s| s.estimator == e && s.at == n as f64).map(|s| s.by_potentials).unwrap()
                } else {
                    cfg.lambda_list[0]
                };
                let p = points
                    .iter()
                    .find(|p| p.estimator == e && p.n == n && (p.lambda == lambda || !e.regularized()))
                    .expect("point computed");
                let mut row = p.row(Cell::Int(n as u64), readout, setup.w2sq);
                if optimal {
                    row.extra.push(p.lambda);
                }
                row
            })
            .collect();
        let extra: &[&str] = if optimal { &["blur"] } else { &[] };
        let mut t = Table::errors("Nsamples", extra, &rows);
        header_comments(&mut t, cfg, e, setup.w2sq, readout);
        if e.regularized() && !optimal {
            t.comment(format!("lambda={}", cfg.lambda_list[0]));
        }
        if optimal && e.regularized() {
            t.comment("blur=lambda minimizing error_on_potentials at each n");
        }
        tables.push((e, t));
    }
    write_tables(cfg, &tables)?;
    Ok(SweepResult {
        truth: setup.w2sq,
        points,
        lambda_star,
        tables,
    })
}

/// Error against λ at the single sample size of `n_list`. The plug-in does
/// not depend on λ and repeats on every row.
pub fn run_lambda_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    if cfg.experiment != Experiment::LambdaSweep {
        return Err(BenchError::Config(format!("{} is not a lambda sweep", cfg.experiment.name())));
    }
    let setup = PairSetup::from_config(cfg)?;
    let readout = Readout::from_config(cfg);
    let n = cfg.n_list[0];
    let mut lambdas = cfg.lambda_list.clone();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();

    let points = sweep_at(&setup, cfg, n, &lambdas)?;
    let lambda_star: Vec<LambdaStar> = cfg
        .estimators
        .iter()
        .filter(|e| e.regularized())
        .map(|&e| lambda_star_at(&points, e, n as f64, readout, setup.w2sq))
        .collect();

    let mut tables = Vec::new();
    for &e in &cfg.estimators {
        let rows: Vec<ResultRow> = lambdas
            .iter()
            .map(|&l| {
                let p = points
                    .iter()
                    .find(|p| p.estimator == e && (p.lambda == l || !e.regularized()))
                    .expect("point computed");
                p.row(Cell::Float(l), readout, setup.w2sq)
            })
            .collect();
        let mut t = Table::errors("blur", &[], &rows);
        header_comments(&mut t, cfg, e, setup.w2sq, readout);
        t.comment(format!("Nsamples={n}"));
        if let Some(s) = lambda_star.iter().find(|s| s.estimator == e) {
            t.comment(format!("lambda_star_cost={} lambda_star_potentials={}", s.by_cost, s.by_potentials));
        }
        tables.push((e, t));
    }
    write_tables(cfg, &tables)?;
    Ok(SweepResult {
        truth: setup.w2sq,
        points,
        lambda_star,
        tables,
    })
}

//! Closed-form Gaussian checks: Fisher identity, the small-λ expansion of
//! `S_λ`, and sampled estimators against their closed forms.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use w2est::gaussian::{
    bures_sq, entropic_cost_gaussian, expansion_coefficients, fisher_info_geodesic, sinkhorn_divergence_gaussian,
    spd_inverse, w2sq_gaussian, GaussianMeasure,
};
use w2est::sampling::RngStream;

use crate::runners::{describe, run_trials, write_tables};
use crate::setup::PairSetup;
use crate::table::{mean_std, Cell, ResultRow, Table};
use crate::trial::{evaluate, PluginChoice, Reference};
use crate::{BenchError, Estimator, Experiment, ExperimentConfig, Law, Result};

/// Stream ids under the experiment seed.
const PAIR_STREAM: u64 = 10;
const FISHER_STREAM: u64 = 11;

/// λ range of the expansion fit.
const FIT_RANGE: (f64, f64) = (0.02, 0.2);
const FIT_POINTS: usize = 16;

/// `MMᵀ/k` for a `d × k` standard normal `M`, `k = round(d/aspect)`:
/// eigenvalues concentrate around 1.
pub fn wishart_covariance(d: usize, aspect: f64, stream: RngStream) -> DMatrix<f64> {
    let mut rng = stream.rng();
    let k = ((d as f64 / aspect).round() as usize).max(d);
    let m = DMatrix::<f64>::from_fn(d, k, |_, _| StandardNormal.sample(&mut rng));
    let a = &m * m.transpose() / k as f64;
    (&a + a.transpose()) * 0.5
}

/// Sampled estimator against its closed form at one `(n, λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub n: usize,
    pub lambda: f64,
    pub estimator: Estimator,
    pub closed_form: f64,
    pub mean: f64,
    pub std_error: f64,
}

impl Comparison {
    /// `|mean − closed form|` in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.mean - self.closed_form).abs() / self.std_error
    }
}

#[derive(Debug, Clone)]
pub struct GaussianReport {
    pub covariances: (DMatrix<f64>, DMatrix<f64>),
    /// Largest `|2 tr S⁻¹ − tr A⁻¹ − tr B⁻¹ + Bures²(A⁻¹, B⁻¹)|` over the
    /// random pairs.
    pub fisher_max_residual: f64,
    pub c2_closed: f64,
    pub c2_fit: f64,
    pub c2_relative_error: f64,
    /// Root-mean-square residual of the expansion fit.
    pub fit_rms_residual: f64,
    pub comparisons: Vec<Comparison>,
    pub tables: Vec<(Estimator, Table)>,
}

fn fisher_residual(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let tr_s_inv = fisher_info_geodesic(a, b)?;
    let ai = spd_inverse(a)?;
    let bi = spd_inverse(b)?;
    Ok((2.0 * tr_s_inv - ai.trace() - bi.trace() + bures_sq(&ai, &bi)?).abs())
}

/// Least-squares fit of `S_λ − W₂² ≈ c₂λ² + c₄λ⁴ + c₆λ⁶` over a log grid.
/// Returns `(c₂, rms residual)`.
pub fn fit_expansion(mu: &GaussianMeasure, nu: &GaussianMeasure) -> Result<(f64, f64)> {
    let w2 = w2sq_gaussian(mu, nu)?;
    let (lo, hi) = FIT_RANGE;
    let lambdas: Vec<f64> = (0..FIT_POINTS)
        .map(|k| lo * (hi / lo).powf(k as f64 / (FIT_POINTS - 1) as f64))
        .collect();
    let y = lambdas
        .iter()
        .map(|&l| Ok(sinkhorn_divergence_gaussian(mu, nu, l)? - w2))
        .collect::<Result<Vec<f64>>>()?;
    let x = DMatrix::from_fn(FIT_POINTS, 3, |i, j| lambdas[i].powi(2 * (j as i32 + 1)));
    let y = DVector::from_vec(y);
    let coef = x
        .clone()
        .svd(true, true)
        .solve(&y, 1e-300)
        .map_err(|e| BenchError::Config(format!("expansion fit failed: {e}")))?;
    let residual = (&x * &coef - &y).norm() / (FIT_POINTS as f64).sqrt();
    Ok((coef[0], residual))
}

fn closed_form(estimator: Estimator, mu: &GaussianMeasure, nu: &GaussianMeasure, lambda: f64) -> Result<f64> {
    Ok(match estimator {
        Estimator::T => entropic_cost_gaussian(mu, nu, lambda)?,
        Estimator::S => sinkhorn_divergence_gaussian(mu, nu, lambda)?,
        Estimator::R => {
            2.0 * sinkhorn_divergence_gaussian(mu, nu, lambda)?
                - sinkhorn_divergence_gaussian(mu, nu, std::f64::consts::SQRT_2 * lambda)?
        }
        Estimator::Plugin => w2sq_gaussian(mu, nu)?,
    })
}

/// Gaussian validation on a random pair of unit-scale covariances (`B = A`
/// with `same_distribution`). Sampled estimators are compared with the
/// closed form of the same quantity at the same λ; the potential columns
/// use the Brenier potential.
pub fn run_gaussian_validation(cfg: &ExperimentConfig) -> Result<GaussianReport> {
    cfg.validate()?;
    if cfg.experiment != Experiment::GaussianValidation {
        return Err(BenchError::Config(format!("{} is not a gaussian validation", cfg.experiment.name())));
    }
    let d = cfg.d;
    let pair_stream = RngStream::new(cfg.seed, PAIR_STREAM);
    let a = wishart_covariance(d, cfg.aspect, pair_stream.derive(0));
    let b = if cfg.same_distribution {
        a.clone()
    } else {
        wishart_covariance(d, cfg.aspect, pair_stream.derive(1))
    };

    let fisher_stream = RngStream::new(cfg.seed, FISHER_STREAM);
    let mut fisher_max_residual = 0.0f64;
    for k in 0..cfg.trials as u64 {
        let s = fisher_stream.derive(k);
        let (x, y) = if cfg.same_distribution {
            let x = wishart_covariance(d, cfg.aspect, s.derive(0));
            (x.clone(), x)
        } else {
            (wishart_covariance(d, cfg.aspect, s.derive(0)), wishart_covariance(d, cfg.aspect, s.derive(1)))
        };
        fisher_max_residual = fisher_max_residual.max(fisher_residual(&x, &y)?);
    }

    let mu = GaussianMeasure::centered(a.clone())?;
    let nu = GaussianMeasure::centered(b.clone())?;
    let (c2_closed, _) = expansion_coefficients(&a, &b)?;
    let (c2_fit, fit_rms_residual) = fit_expansion(&mu, &nu)?;
    let c2_relative_error = if c2_closed == 0.0 {
        c2_fit.abs()
    } else {
        ((c2_fit - c2_closed) / c2_closed).abs()
    };

    let mut sampling_cfg = cfg.clone();
    sampling_cfg.law = Law::Gaussian;
    let setup = PairSetup::with_covariances(&sampling_cfg, a.clone(), b.clone())?;
    let plugin = PluginChoice::from_config(cfg);
    let mut comparisons = Vec::new();
    let mut rows: Vec<(Estimator, ResultRow)> = Vec::new();
    for &n in &cfg.n_list {
        for &lambda in &cfg.lambda_list {
            let solver = cfg.solver_at(lambda);
            let per_trial = run_trials(cfg.trials, |trial| {
                let draw = setup.draw(n, trial, cfg.eval_points)?;
                let values: Vec<f64> = draw.eval.iter_points().map(|x| setup.potential.eval(x)).collect();
                let reference = Reference {
                    eval: &draw.eval,
                    values: &values,
                };
                evaluate(&draw.mu, &draw.nu, reference, &cfg.estimators, &solver, plugin)
            })?;
            for (k, &e) in cfg.estimators.iter().enumerate() {
                let target = closed_form(e, &mu, &nu, lambda)?;
                let estimates: Vec<f64> = per_trial.iter().map(|t| t[k].value).collect();
                let cost_errors: Vec<f64> = estimates.iter().map(|v| (v - target).abs()).collect();
                let potential_errors: Vec<f64> = per_trial.iter().map(|t| t[k].potential_error).collect();
                let (mean, std) = mean_std(&estimates);
                comparisons.push(Comparison {
                    n,
                    lambda,
                    estimator: e,
                    closed_form: target,
                    mean,
                    std_error: std / (cfg.trials as f64).sqrt(),
                });
                let mut row = ResultRow::from_trials(Cell::Int(n as u64), &cost_errors, &potential_errors);
                row.extra.push(lambda);
                rows.push((e, row));
            }
        }
    }

    let mut tables = Vec::new();
    for &e in &cfg.estimators {
        let own: Vec<ResultRow> = rows.iter().filter(|(x, _)| *x == e).map(|(_, r)| r.clone()).collect();
        let mut t = Table::errors("Nsamples", &["blur"], &own);
        t.comment("ground_truth=gaussian_closed_form_same_lambda potential=quadratic_brenier gauge=mean_zero");
        t.comment(describe(cfg, e));
        t.comment(format!(
            "fisher_max_residual={fisher_max_residual:e} c2_closed={c2_closed:e} c2_fit={c2_fit:e} c2_relative_error={c2_relative_error:e}"
        ));
        tables.push((e, t));
    }
    write_tables(cfg, &tables)?;
    Ok(GaussianReport {
        covariances: (a, b),
        fisher_max_residual,
        c2_closed,
        c2_fit,
        c2_relative_error,
        fit_rms_residual,
        comparisons,
        tables,
    })
}

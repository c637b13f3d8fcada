use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use w2est::sinkhorn::SolverConfig;

use crate::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimator {
    /// Entropic cost `T_λ`.
    T,
    /// Sinkhorn divergence `S_λ`.
    S,
    /// Richardson extrapolation `R_λ = 2S_λ − S_{√2λ}`.
    R,
    /// Plug-in `W₂²` between the empirical measures.
    Plugin,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [Estimator::T, Estimator::S, Estimator::R, Estimator::Plugin];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::T => "T",
            Estimator::S => "S",
            Estimator::R => "R",
            Estimator::Plugin => "plugin",
        }
    }

    /// Whether the estimator depends on λ.
    pub fn regularized(self) -> bool {
        self != Estimator::Plugin
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "t" => Ok(Estimator::T),
            "s" => Ok(Estimator::S),
            "r" => Ok(Estimator::R),
            "plugin" | "plug-in" => Ok(Estimator::Plugin),
            other => Err(BenchError::Config(format!("unknown estimator `{other}`"))),
        }
    }
}

/// Comma-separated estimator list; duplicates are dropped.
pub fn parse_estimators(s: &str) -> Result<Vec<Estimator>> {
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let e: Estimator = part.parse()?;
        if !out.contains(&e) {
            out.push(e);
        }
    }
    Ok(out)
}

/// Comma-separated list of numbers.
pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| BenchError::Config(format!("cannot parse `{}` in list `{s}`", p.trim())))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    SampleComplexity,
    LambdaSweep,
    OptimalLambdaCurve,
    GridStudy,
    GaussianValidation,
    TimingFrontier,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::SampleComplexity => "sample_complexity",
            Experiment::LambdaSweep => "lambda_sweep",
            Experiment::OptimalLambdaCurve => "optimal_lambda_curve",
            Experiment::GridStudy => "grid_study",
            Experiment::GaussianValidation => "gaussian_validation",
            Experiment::TimingFrontier => "timing_frontier",
        }
    }
}

/// Family the sampled measures are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Law {
    /// Compactly supported elliptical law with a `β`-shaped radial profile.
    Elliptic,
    Gaussian,
}

impl FromStr for Law {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "elliptic" => Ok(Law::Elliptic),
            "gaussian" => Ok(Law::Gaussian),
            other => Err(BenchError::Config(format!("unknown law `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub d: usize,
    pub n_list: Vec<usize>,
    pub h_list: Vec<f64>,
    pub lambda_list: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    /// Stopping rule and acceleration; its λ is replaced by each sweep value.
    pub solver: SolverConfig,
    pub law: Law,
    /// Draw both samples from the same law (`W₂² = 0`).
    pub same_distribution: bool,
    /// Use one sample for both measures (implies `same_distribution`).
    pub identical_samples: bool,
    pub beta: f64,
    pub aspect: f64,
    /// Exact assignment for the plug-in instead of the small-λ proxy.
    pub plugin_exact: bool,
    pub plugin_proxy_lambda: f64,
    /// Size of the held-out sample on which potentials are compared.
    pub eval_points: usize,
    /// Potential-error targets of the timing frontier.
    pub targets: Vec<f64>,
    /// Report the error on `W₂` instead of `W₂²`.
    pub sqrt_readout: bool,
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            d: 5,
            n_list: vec![100, 316, 1000, 3162, 10000],
            h_list: vec![1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0, 1.0 / 512.0],
            lambda_list: vec![1.0],
            trials: 30,
            seed: 0,
            estimators: vec![Estimator::T, Estimator::S, Estimator::R],
            solver: SolverConfig::default(),
            law: Law::Elliptic,
            same_distribution: false,
            identical_samples: false,
            beta: 2.0,
            aspect: 1.0 / 3.0,
            plugin_exact: false,
            plugin_proxy_lambda: 0.01,
            eval_points: 2000,
            targets: vec![0.2, 0.1, 0.05],
            sqrt_readout: false,
            output_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.d == 0 {
            return bad("dimension must be at least 1".into());
        }
        if self.estimators.is_empty() {
            return bad("no estimator selected".into());
        }
        if self.lambda_list.is_empty() {
            return bad("empty lambda list".into());
        }
        if let Some(l) = self.lambda_list.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return bad(format!("lambda {l} must be positive"));
        }
        if !(self.plugin_proxy_lambda.is_finite() && self.plugin_proxy_lambda > 0.0) {
            return bad("plugin proxy lambda must be positive".into());
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad("beta must be positive".into());
        }
        if !(self.aspect > 0.0 && self.aspect < 1.0) {
            return bad("aspect must lie in (0, 1)".into());
        }
        if self.eval_points == 0 {
            return bad("eval_points must be at least 1".into());
        }
        self.solver.validate().map_err(|e| BenchError::Config(e.to_string()))?;

        match self.experiment {
            Experiment::GridStudy => {
                if self.d != 1 {
                    return bad("the grid study runs on the circle (d = 1)".into());
                }
                if self.h_list.is_empty() {
                    return bad("empty h list".into());
                }
                for &h in &self.h_list {
                    grid_resolution(h)?;
                }
            }
            _ => {
                if self.n_list.is_empty() {
                    return bad("empty n list".into());
                }
                if self.n_list.contains(&0) {
                    return bad("sample sizes must be positive".into());
                }
            }
        }
        match self.experiment {
            Experiment::LambdaSweep if self.n_list.len() != 1 => bad("a lambda sweep takes a single n".into()),
            Experiment::GaussianValidation if self.d > 10 => bad("gaussian validation supports d ≤ 10".into()),
            Experiment::TimingFrontier if self.targets.is_empty() => bad("no target accuracy".into()),
            Experiment::TimingFrontier if self.targets.iter().any(|t| !(t.is_finite() && *t > 0.0)) => {
                bad("targets must be positive".into())
            }
            _ => Ok(()),
        }
    }

    pub fn solver_at(&self, lambda: f64) -> SolverConfig {
        self.solver.with_lambda(lambda)
    }
}

/// Number of grid cells per unit length for spacing `h`.
pub fn grid_resolution(h: f64) -> Result<usize> {
    if !(h.is_finite() && h > 0.0 && h <= 0.5) {
        return Err(BenchError::Config(format!("grid spacing {h} must lie in (0, 1/2]")));
    }
    let m = (1.0 / h).round();
    if ((1.0 / h) - m).abs() > 1e-6 * m {
        return Err(BenchError::Config(format!("1/h must be an integer, got h = {h}")));
    }
    Ok(m as usize)
}

/// `out/fig.csv` → `out/fig_S.csv`.
pub fn output_for(base: &Path, estimator: Estimator) -> PathBuf {
    suffixed(base, estimator.name())
}

pub fn suffixed(base: &Path, suffix: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}_{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{suffix}"),
    };
    base.with_file_name(name)
}

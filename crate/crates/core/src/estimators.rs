//! W₂² estimators built on the entropic cost, and smooth dual potentials.
//!
//! - plug-in: `T_λ` at a small proxy λ, or the exact assignment cost
//! - Sinkhorn divergence `S_λ = T_λ(μ,ν) − ½(T_λ(μ,μ) + T_λ(ν,ν))`
//! - Richardson extrapolation `R_λ = 2S_λ − S_{√2λ}`
//!
//! Cost matrices for a pair of measures live in a [`DivergenceProblem`] so
//! they can be reused across λ values.

use std::time::{Duration, Instant};

use crate::exact1d::assignment_w2sq;
use crate::lse::row_lse;
use crate::measures::{cost_matrix, torus_displacement, CostMatrix, DiscreteMeasure, Geometry};
use crate::sinkhorn::{solve, solve_symmetric, transport_estimate, SinkhornSolution, SolverConfig};
use crate::{Error, Result};

/// The three entropic costs behind a Sinkhorn divergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Components {
    pub cross: f64,
    pub self_mu: f64,
    pub self_nu: f64,
}

impl Components {
    /// `cross − ½(self_mu + self_nu)`.
    pub fn divergence(&self) -> f64 {
        self.cross - 0.5 * (self.self_mu + self.self_nu)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub value: f64,
    /// Regularization of the estimate; 0 for the exact plug-in.
    pub lambda: f64,
    /// Present for Sinkhorn divergences (the finer level for Richardson).
    pub components: Option<Components>,
    /// `(S_λ, S_{√2λ})` for Richardson extrapolation.
    pub levels: Option<(f64, f64)>,
    pub iterations_total: usize,
    pub wall_time: Duration,
    /// False if any underlying solve hit `max_iters`.
    pub converged: bool,
}

/// A solved entropic problem together with its two measures.
#[derive(Debug, Clone)]
pub struct SolvedPair {
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    pub solution: SinkhornSolution,
}

impl SolvedPair {
    /// `T̂_λ(μ, ν)`.
    pub fn value(&self) -> f64 {
        transport_estimate(&self.solution, &self.mu, &self.nu)
    }

    /// `û(x) = −λ log Σⱼ exp((vⱼ − ½d(x, yⱼ)²)/λ) qⱼ`, the smooth extension of
    /// the first dual variable.
    pub fn first_potential(&self) -> SmoothPotential {
        SmoothPotential::new(&self.nu, &self.solution.v, self.solution.lambda)
    }

    /// `v̂(y)`, the same construction from `(μ, u)`.
    pub fn second_potential(&self) -> SmoothPotential {
        SmoothPotential::new(&self.mu, &self.solution.u, self.solution.lambda)
    }
}

/// Solutions of the three problems of a Sinkhorn divergence.
#[derive(Debug, Clone)]
pub struct DivergenceSolutions {
    pub cross: SolvedPair,
    pub self_mu: SolvedPair,
    pub self_nu: SolvedPair,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DivergenceOptions {
    /// Debias with `T_λ(μ̂_{n/2}, μ̂′_{n/2})` between the two halves of each
    /// sample instead of `T_λ(μ̂, μ̂)`.
    pub split_self: bool,
}

/// Cost matrices for estimating `W₂²(μ, ν)`, reusable across λ.
#[derive(Debug, Clone)]
pub struct DivergenceProblem {
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    identical: bool,
    split_self: bool,
    cross: CostMatrix,
    /// Self problems as `(first, second, cost)`; `None` reuses `cross`.
    self_mu: Option<(DiscreteMeasure, DiscreteMeasure, CostMatrix)>,
    self_nu: Option<(DiscreteMeasure, DiscreteMeasure, CostMatrix)>,
    setup_time: Duration,
}

fn self_problem(m: &DiscreteMeasure, split: bool) -> Result<(DiscreteMeasure, DiscreteMeasure, CostMatrix)> {
    let (a, b) = if split { m.split_halves()? } else { (m.clone(), m.clone()) };
    let c = cost_matrix(&a, &b)?;
    Ok((a, b, c))
}

impl DivergenceProblem {
    /// Builds the cross cost and, unless μ and ν are equal atom for atom,
    /// the two self costs. Zero-weight atoms are dropped.
    pub fn new(mu: &DiscreteMeasure, nu: &DiscreteMeasure, opts: DivergenceOptions) -> Result<Self> {
        let start = Instant::now();
        let mu = mu.without_zero_weights()?;
        let nu = nu.without_zero_weights()?;
        let identical = mu == nu;
        let cross = cost_matrix(&mu, &nu)?;
        let (self_mu, self_nu) = if identical && !opts.split_self {
            (None, None)
        } else if identical {
            let s = self_problem(&mu, true)?;
            (Some(s.clone()), Some(s))
        } else {
            (Some(self_problem(&mu, opts.split_self)?), Some(self_problem(&nu, opts.split_self)?))
        };
        Ok(Self {
            mu,
            nu,
            identical,
            split_self: opts.split_self,
            cross,
            self_mu,
            self_nu,
            setup_time: start.elapsed(),
        })
    }

    pub fn mu(&self) -> &DiscreteMeasure {
        &self.mu
    }

    pub fn nu(&self) -> &DiscreteMeasure {
        &self.nu
    }

    /// True when μ and ν compare equal atom for atom.
    pub fn identical(&self) -> bool {
        self.identical
    }

    /// Time spent building the cost matrices.
    pub fn setup_time(&self) -> Duration {
        self.setup_time
    }

    fn solve_cross(&self, cfg: &SolverConfig) -> Result<SolvedPair> {
        let solution = if self.identical {
            solve_symmetric(&self.mu, &self.cross, cfg)?
        } else {
            solve(&self.mu, &self.nu, &self.cross, cfg)?
        };
        Ok(SolvedPair {
            mu: self.mu.clone(),
            nu: self.nu.clone(),
            solution,
        })
    }

    fn solve_self(&self, which: &Option<(DiscreteMeasure, DiscreteMeasure, CostMatrix)>, cfg: &SolverConfig) -> Result<Option<SolvedPair>> {
        let Some((a, b, c)) = which else {
            return Ok(None);
        };
        let solution = if self.split_self {
            solve(a, b, c, cfg)?
        } else {
            solve_symmetric(a, c, cfg)?
        };
        Ok(Some(SolvedPair {
            mu: a.clone(),
            nu: b.clone(),
            solution,
        }))
    }

    /// `T_λ(μ, ν)` at `cfg.lambda`.
    pub fn entropic(&self, cfg: &SolverConfig) -> Result<(EstimateReport, SolvedPair)> {
        let start = Instant::now();
        let pair = self.solve_cross(cfg)?;
        let report = EstimateReport {
            value: pair.value(),
            lambda: cfg.lambda,
            components: None,
            levels: None,
            iterations_total: pair.solution.iterations,
            wall_time: self.setup_time + start.elapsed(),
            converged: pair.solution.converged,
        };
        Ok((report, pair))
    }

    /// `S_λ(μ, ν)` at `cfg.lambda`. Equal inputs give exactly 0.
    pub fn divergence(&self, cfg: &SolverConfig) -> Result<(EstimateReport, DivergenceSolutions)> {
        let start = Instant::now();
        let cross = self.solve_cross(cfg)?;
        let mut iterations_total = cross.solution.iterations;
        let mut solved = |which| -> Result<SolvedPair> {
            Ok(match self.solve_self(which, cfg)? {
                Some(p) => {
                    iterations_total += p.solution.iterations;
                    p
                }
                None => cross.clone(),
            })
        };
        let self_mu = solved(&self.self_mu)?;
        let self_nu = if self.identical { self_mu.clone() } else { solved(&self.self_nu)? };
        let components = Components {
            cross: cross.value(),
            self_mu: self_mu.value(),
            self_nu: self_nu.value(),
        };
        let value = if self.identical && !self.split_self {
            0.0
        } else {
            components.divergence()
        };
        let converged = cross.solution.converged && self_mu.solution.converged && self_nu.solution.converged;
        let report = EstimateReport {
            value,
            lambda: cfg.lambda,
            components: Some(components),
            levels: None,
            iterations_total,
            wall_time: self.setup_time + start.elapsed(),
            converged,
        };
        Ok((
            report,
            DivergenceSolutions {
                cross,
                self_mu,
                self_nu,
            },
        ))
    }

    /// `R_λ = 2S_λ − S_{√2λ}`; both levels are solved from scratch.
    pub fn richardson(&self, cfg: &SolverConfig) -> Result<(EstimateReport, [DivergenceSolutions; 2])> {
        let start = Instant::now();
        let (fine, fine_sols) = self.divergence(cfg)?;
        let coarse_cfg = cfg.with_lambda(std::f64::consts::SQRT_2 * cfg.lambda);
        let (coarse, coarse_sols) = self.divergence(&coarse_cfg)?;
        let report = EstimateReport {
            value: 2.0 * fine.value - coarse.value,
            lambda: cfg.lambda,
            components: fine.components,
            levels: Some((fine.value, coarse.value)),
            iterations_total: fine.iterations_total + coarse.iterations_total,
            wall_time: self.setup_time + start.elapsed(),
            converged: fine.converged && coarse.converged,
        };
        Ok((report, [fine_sols, coarse_sols]))
    }
}

/// `T_λ(μ, ν)` at `cfg.lambda`.
pub fn entropic_cost(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cfg: &SolverConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mu = mu.without_zero_weights()?;
    let nu = nu.without_zero_weights()?;
    let cost = cost_matrix(&mu, &nu)?;
    let sol = solve(&mu, &nu, &cost, cfg)?;
    Ok(EstimateReport {
        value: transport_estimate(&sol, &mu, &nu),
        lambda: cfg.lambda,
        components: None,
        levels: None,
        iterations_total: sol.iterations,
        wall_time: start.elapsed(),
        converged: sol.converged,
    })
}

/// Sinkhorn divergence `S_λ(μ, ν)` at `cfg.lambda`.
pub fn sinkhorn_divergence(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cfg: &SolverConfig,
    opts: DivergenceOptions,
) -> Result<EstimateReport> {
    cfg.validate()?;
    if mu == nu && !opts.split_self {
        return Ok(EstimateReport {
            value: 0.0,
            lambda: cfg.lambda,
            components: None,
            levels: None,
            iterations_total: 0,
            wall_time: Duration::ZERO,
            converged: true,
        });
    }
    Ok(DivergenceProblem::new(mu, nu, opts)?.divergence(cfg)?.0)
}

/// Richardson extrapolation `R_λ = 2S_λ − S_{√2λ}` at `cfg.lambda`.
pub fn richardson(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cfg: &SolverConfig,
    opts: DivergenceOptions,
) -> Result<EstimateReport> {
    cfg.validate()?;
    Ok(DivergenceProblem::new(mu, nu, opts)?.richardson(cfg)?.0)
}

/// `2s(λ) − s(√2λ)` for an arbitrary level function `s`.
pub fn richardson_with(lambda: f64, mut s: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda {lambda}")));
    }
    Ok(2.0 * s(lambda)? - s(std::f64::consts::SQRT_2 * lambda)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PluginMode {
    /// Entropic cost at the proxy λ taken from the solver config.
    SmallLambda,
    /// Exact assignment; uniform weights and equal sizes only.
    ExactAssignment,
}

/// Plug-in estimate `W₂²(μ̂, ν̂)`.
pub fn plugin_w2sq(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cfg: &SolverConfig,
    mode: PluginMode,
) -> Result<EstimateReport> {
    match mode {
        PluginMode::SmallLambda => entropic_cost(mu, nu, cfg),
        PluginMode::ExactAssignment => {
            for m in [mu, nu] {
                let w0 = m.weights()[0];
                if m.weights().iter().any(|&w| (w - w0).abs() > 1e-12 * w0) {
                    return Err(Error::InvalidParameter(
                        "exact plug-in needs uniform weights".into(),
                    ));
                }
            }
            let start = Instant::now();
            let value = assignment_w2sq(mu, nu)?;
            Ok(EstimateReport {
                value,
                lambda: 0.0,
                components: None,
                levels: None,
                iterations_total: 0,
                wall_time: start.elapsed(),
                converged: true,
            })
        }
    }
}

/// `x ↦ −λ log Σⱼ exp((gⱼ − ½d(x, yⱼ)²)/λ) wⱼ` for atoms `(yⱼ, wⱼ)` and
/// dual values `gⱼ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothPotential {
    /// Coordinate-major copy of the atoms.
    columns: Vec<f64>,
    len: usize,
    dim: usize,
    geometry: Geometry,
    /// `gⱼ/λ + log wⱼ`.
    shifted: Vec<f64>,
    lambda: f64,
}

impl SmoothPotential {
    fn new(atoms: &DiscreteMeasure, dual: &[f64], lambda: f64) -> Self {
        let (len, dim) = (atoms.len(), atoms.dim());
        let mut columns = vec![0.0; len * dim];
        for (j, y) in atoms.iter_points().enumerate() {
            for (k, &c) in y.iter().enumerate() {
                columns[k * len + j] = c;
            }
        }
        let shifted = dual
            .iter()
            .zip(atoms.weights())
            .map(|(g, w)| g / lambda + w.ln())
            .collect();
        Self {
            columns,
            len,
            dim,
            geometry: atoms.geometry(),
            shifted,
            lambda,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn eval_with(&self, x: &[f64], row: &mut Vec<f64>) -> f64 {
        row.clear();
        row.resize(self.len, 0.0);
        for (k, &xk) in x.iter().enumerate() {
            let col = &self.columns[k * self.len..(k + 1) * self.len];
            match self.geometry {
                Geometry::Euclidean => {
                    for (r, &y) in row.iter_mut().zip(col) {
                        *r += (xk - y) * (xk - y);
                    }
                }
                Geometry::Torus => {
                    for (r, &y) in row.iter_mut().zip(col) {
                        let t = torus_displacement(xk, y);
                        *r += t * t;
                    }
                }
            }
        }
        -self.lambda * row_lse(&self.shifted, row, 0.5 / self.lambda)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_with(x, &mut Vec::new())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    /// `2û_{μ,ν}`.
    Biased,
    /// `2û_{μ,ν} − (û_{μ,μ} + v̂_{μ,μ})`.
    Debiased,
    /// `2φ̂_λ − φ̂_{√2λ}` of two debiased potentials.
    Extrapolated,
}

/// Estimated first Kantorovich potential for the cost `‖x − y‖²`, a linear
/// combination of smooth dual extensions.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialFunction {
    kind: PotentialKind,
    lambda: f64,
    terms: Vec<(f64, SmoothPotential)>,
}

fn same_lambda(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

impl PotentialFunction {
    pub fn biased(cross: &SolvedPair) -> Self {
        Self {
            kind: PotentialKind::Biased,
            lambda: cross.solution.lambda,
            terms: vec![(2.0, cross.first_potential())],
        }
    }

    /// `self_mu` is the self problem of the first measure (or of its two
    /// halves).
    pub fn debiased(cross: &SolvedPair, self_mu: &SolvedPair) -> Result<Self> {
        if !same_lambda(cross.solution.lambda, self_mu.solution.lambda) {
            return Err(Error::LambdaMismatch(cross.solution.lambda, self_mu.solution.lambda));
        }
        Ok(Self {
            kind: PotentialKind::Debiased,
            lambda: cross.solution.lambda,
            terms: vec![
                (2.0, cross.first_potential()),
                (-1.0, self_mu.first_potential()),
                (-1.0, self_mu.second_potential()),
            ],
        })
    }

    pub fn from_divergence(sols: &DivergenceSolutions) -> Result<Self> {
        Self::debiased(&sols.cross, &sols.self_mu)
    }

    /// `2·fine − coarse`; both debiased, with `coarse.λ = √2·fine.λ`.
    pub fn extrapolated(fine: &PotentialFunction, coarse: &PotentialFunction) -> Result<Self> {
        if fine.kind != PotentialKind::Debiased || coarse.kind != PotentialKind::Debiased {
            return Err(Error::InvalidParameter(
                "extrapolation combines two debiased potentials".into(),
            ));
        }
        if !same_lambda(std::f64::consts::SQRT_2 * fine.lambda, coarse.lambda) {
            return Err(Error::LambdaMismatch(std::f64::consts::SQRT_2 * fine.lambda, coarse.lambda));
        }
        let terms = fine
            .terms
            .iter()
            .map(|(c, p)| (2.0 * c, p.clone()))
            .chain(coarse.terms.iter().map(|(c, p)| (-c, p.clone())))
            .collect();
        Ok(Self {
            kind: PotentialKind::Extrapolated,
            lambda: fine.lambda,
            terms,
        })
    }

    pub fn from_richardson(sols: &[DivergenceSolutions; 2]) -> Result<Self> {
        Self::extrapolated(&Self::from_divergence(&sols[0])?, &Self::from_divergence(&sols[1])?)
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut row = Vec::new();
        self.terms.iter().map(|(c, p)| c * p.eval_with(x, &mut row)).sum()
    }

    /// Values at every atom of `points`.
    pub fn eval_measure(&self, points: &DiscreteMeasure) -> Vec<f64> {
        let mut row = Vec::new();
        points
            .iter_points()
            .map(|x| self.terms.iter().map(|(c, p)| c * p.eval_with(x, &mut row)).sum())
            .collect()
    }
}

/// Additive-constant alignment before comparing potentials.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Gauge {
    /// Subtract the weighted mean of `est − ref`.
    #[default]
    MeanZeroMatch,
    None,
}

/// `Σᵢ wᵢ |est(xᵢ) − ref(xᵢ) − s|` over the atoms of `eval`, with `s` set
/// by the gauge.
pub fn potential_l1_error(
    est: impl Fn(&[f64]) -> f64,
    reference: impl Fn(&[f64]) -> f64,
    eval: &DiscreteMeasure,
    gauge: Gauge,
) -> Result<f64> {
    let diffs: Vec<f64> = eval.iter_points().map(|x| est(x) - reference(x)).collect();
    l1_from_differences(&diffs, eval.weights(), gauge)
}

/// [`potential_l1_error`] from precomputed differences `est − ref`.
pub fn l1_from_differences(diffs: &[f64], weights: &[f64], gauge: Gauge) -> Result<f64> {
    if diffs.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if diffs.len() != weights.len() {
        return Err(Error::LengthMismatch(diffs.len(), weights.len()));
    }
    if let Some(bad) = diffs.iter().find(|d| !d.is_finite()) {
        return Err(Error::NonFinite(format!("potential difference {bad}")));
    }
    let s = match gauge {
        Gauge::MeanZeroMatch => diffs.iter().zip(weights).map(|(d, w)| d * w).sum(),
        Gauge::None => 0.0,
    };
    Ok(diffs.iter().zip(weights).map(|(d, w)| w * (d - s).abs()).sum())
}

#[cfg(test)]
mod tests;

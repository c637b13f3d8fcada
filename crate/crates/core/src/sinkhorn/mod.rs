//! Log-domain Sinkhorn iterations for the entropic transport problem.
//!
//! With half-cost `c_ij = ½‖xᵢ − yⱼ‖²`, one iteration updates
//!
//! ```text
//! uᵢ = −λ log Σⱼ exp((vⱼ − c_ij)/λ) qⱼ
//! vⱼ = −λ log Σᵢ exp((uᵢ − c_ij)/λ) pᵢ
//! ```
//!
//! starting from `v = 0`. Both softmins are evaluated with a max shift so no
//! exponential overflows or underflows to a vanishing sum, whatever λ.
//!
//! [`solve`] runs these updates as a fixed-point map on `v` with optional
//! Anderson mixing, stops on the ℓ1 marginal violation, and returns
//! gauge-fixed potentials. [`SinkhornIterates`] exposes the plain iterate
//! sequence for diagnostics.

mod anderson;

use crate::lse::{accumulate_row, col_lse, lse, row_lse, row_sum_shifted, sum_is_safe};
use crate::measures::{CostMatrix, DiscreteMeasure};
use crate::{Error, Result};

use anderson::Anderson;

/// Solver parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Regularization λ > 0.
    pub lambda: f64,
    /// Upper bound on (u, v) pair updates.
    pub max_iters: usize,
    /// Stop once the ℓ1 violation of both marginals is at most this.
    pub marginal_tol: f64,
    /// Anderson window on the v-sequence; 0 disables mixing.
    pub anderson_depth: usize,
    /// Relative Tikhonov weight of the Anderson least-squares problem.
    pub anderson_regularization: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            max_iters: 10_000,
            marginal_tol: 1e-5,
            anderson_depth: 5,
            anderson_regularization: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_tolerance(mut self, marginal_tol: f64) -> Self {
        self.marginal_tol = marginal_tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_anderson(mut self, depth: usize) -> Self {
        self.anderson_depth = depth;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.marginal_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "marginal_tol must be positive, got {}",
                self.marginal_tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.anderson_regularization >= 0.0) {
            return Err(Error::InvalidParameter(
                "anderson_regularization must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Dual potentials returned by [`solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornSolution {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub lambda: f64,
    /// Number of (u, v) pair updates performed.
    pub iterations: usize,
    /// ℓ1 violation of the two marginals of the implied plan.
    pub final_marginal_error: f64,
    /// ‖c‖_∞ of the cost the solution was computed for.
    pub cost_max: f64,
    /// False when `max_iters` was exhausted before reaching the tolerance.
    pub converged: bool,
}

impl SinkhornSolution {
    /// Shifts `(u, v)` by `(−s, +s)` so that `Σ pᵢuᵢ = Σ qⱼvⱼ`.
    pub fn gauge_fix(&mut self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) {
        let s = 0.5 * (dot(mu.weights(), &self.u) - dot(nu.weights(), &self.v));
        self.u.iter_mut().for_each(|x| *x -= s);
        self.v.iter_mut().for_each(|x| *x += s);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_problem(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostMatrix) -> Result<()> {
    if cost.rows() != mu.len() || cost.cols() != nu.len() {
        return Err(Error::LengthMismatch(
            cost.rows() * cost.cols(),
            mu.len() * nu.len(),
        ));
    }
    for m in [mu, nu] {
        if let Some(i) = m.weights().iter().position(|&w| w <= 0.0) {
            return Err(Error::ZeroWeightAtom(i));
        }
    }
    Ok(())
}

/// The two half-updates of Sinkhorn's algorithm for a fixed problem.
pub struct LogKernel<'a> {
    cost: &'a CostMatrix,
    log_p: Vec<f64>,
    log_q: Vec<f64>,
    lambda: f64,
}

impl<'a> LogKernel<'a> {
    pub fn new(
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
        cost: &'a CostMatrix,
        lambda: f64,
    ) -> Result<Self> {
        check_problem(mu, nu, cost)?;
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda {lambda}")));
        }
        Ok(Self {
            cost,
            log_p: mu.weights().iter().map(|w| w.ln()).collect(),
            log_q: nu.weights().iter().map(|w| w.ln()).collect(),
            lambda,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `uᵢ = −λ log Σⱼ exp((vⱼ − c_ij)/λ) qⱼ`.
    pub fn update_u(&self, v: &[f64], u: &mut [f64]) {
        let inv = 1.0 / self.lambda;
        let w: Vec<f64> = v.iter().zip(&self.log_q).map(|(v, lq)| v * inv + lq).collect();
        for (i, ui) in u.iter_mut().enumerate() {
            *ui = -self.lambda * row_lse(&w, self.cost.row(i), inv);
        }
    }

    /// Same as [`update_u`](Self::update_u), reusing the row log-sum-exps of
    /// the previous call (stored in `lses`) as single-pass shifts.
    fn update_u_warm(&self, v: &[f64], u: &mut [f64], lses: &mut Vec<f64>) {
        let inv = 1.0 / self.lambda;
        let w: Vec<f64> = v.iter().zip(&self.log_q).map(|(v, lq)| v * inv + lq).collect();
        let warm = lses.len() == u.len();
        lses.resize(u.len(), 0.0);
        for (i, (ui, a)) in u.iter_mut().zip(lses.iter_mut()).enumerate() {
            let row = self.cost.row(i);
            let s = if warm { row_sum_shifted(&w, row, inv, *a) } else { f64::NAN };
            *a = if sum_is_safe(s) { *a + s.ln() } else { row_lse(&w, row, inv) };
            *ui = -self.lambda * *a;
        }
    }

    /// `vⱼ = −λ log Σᵢ exp((uᵢ − c_ij)/λ) pᵢ`.
    pub fn update_v(&self, u: &[f64], v: &mut [f64]) {
        let inv = 1.0 / self.lambda;
        let w: Vec<f64> = u.iter().zip(&self.log_p).map(|(u, lp)| u * inv + lp).collect();
        col_lse(&w, self.cost.entries(), self.cost.cols(), inv, v);
        v.iter_mut().for_each(|x| *x *= -self.lambda);
    }

    /// ℓ1 distance between `weights` and `weights · exp((current − updated)/λ)`,
    /// i.e. the marginal violation of the side that was *not* just updated.
    fn marginal_violation(&self, log_w: &[f64], current: &[f64], updated: &[f64]) -> f64 {
        let inv = 1.0 / self.lambda;
        log_w
            .iter()
            .zip(current.iter().zip(updated))
            .map(|(lw, (c, n))| {
                let w = lw.exp();
                (w - (lw + (c - n) * inv).exp()).abs()
            })
            .sum()
    }
}

/// Plain Sinkhorn iterates `(u⁽ᵏ⁾, v⁽ᵏ⁾)`, `k = 1, 2, …`, from `v⁽⁰⁾ = 0`.
pub struct SinkhornIterates<'a> {
    kernel: LogKernel<'a>,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl<'a> SinkhornIterates<'a> {
    pub fn new(
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
        cost: &'a CostMatrix,
        lambda: f64,
    ) -> Result<Self> {
        let kernel = LogKernel::new(mu, nu, cost, lambda)?;
        Ok(Self {
            kernel,
            u: vec![0.0; mu.len()],
            v: vec![0.0; nu.len()],
        })
    }
}

impl Iterator for SinkhornIterates<'_> {
    type Item = (Vec<f64>, Vec<f64>);

    fn next(&mut self) -> Option<Self::Item> {
        self.kernel.update_u(&self.v, &mut self.u);
        self.kernel.update_v(&self.u, &mut self.v);
        Some((self.u.clone(), self.v.clone()))
    }
}

/// Log-sum-exp values of the previous sweep, reused as shifts so that a
/// sweep usually needs a single pass over the cost matrix.
#[derive(Default)]
struct WarmShifts {
    rows: Option<Vec<f64>>,
    cols: Option<Vec<f64>>,
}

/// One evaluation of the map `v ↦ V(U(v))`.
struct Evaluation {
    u: Vec<f64>,
    image: Vec<f64>,
    /// ℓ1 violation of the ν-marginal of the plan built from `(U(v), v)`;
    /// the μ-marginal of that plan is exact.
    error: f64,
}

impl LogKernel<'_> {
    /// Computes `U(v)` and `V(U(v))` while streaming the cost matrix once:
    /// each row is used for its own softmin and, while still in cache, for
    /// the column sums of the second half-update.
    fn sweep(&self, v: &[f64], shifts: &mut WarmShifts) -> (Vec<f64>, Vec<f64>) {
        let inv = 1.0 / self.lambda;
        let n = self.log_p.len();
        let m = self.log_q.len();
        let w: Vec<f64> = v.iter().zip(&self.log_q).map(|(v, lq)| v * inv + lq).collect();
        let mut row_lses = shifts.rows.take().unwrap_or_default();
        let warm_rows = row_lses.len() == n;
        row_lses.resize(n, 0.0);
        let col_shift = shifts.cols.take();
        let mut col_acc = vec![0.0; m];

        for i in 0..n {
            let row = self.cost.row(i);
            let mut a = f64::NAN;
            if warm_rows {
                let s = row_sum_shifted(&w, row, inv, row_lses[i]);
                if sum_is_safe(s) {
                    a = row_lses[i] + s.ln();
                }
            }
            if a.is_nan() {
                a = row_lse(&w, row, inv);
            }
            row_lses[i] = a;
            if let Some(shift) = &col_shift {
                accumulate_row(&mut col_acc, row, inv, self.log_p[i] - a, shift);
            }
        }

        let u: Vec<f64> = row_lses.iter().map(|a| -self.lambda * a).collect();
        let col_lses: Vec<f64> = match col_shift {
            Some(shift) if col_acc.iter().all(|&s| sum_is_safe(s)) => {
                shift.iter().zip(&col_acc).map(|(b, s)| b + s.ln()).collect()
            }
            _ => {
                let wu: Vec<f64> = row_lses.iter().zip(&self.log_p).map(|(a, lp)| lp - a).collect();
                let mut out = vec![0.0; m];
                col_lse(&wu, self.cost.entries(), m, inv, &mut out);
                out
            }
        };
        let image = col_lses.iter().map(|b| -self.lambda * b).collect();
        shifts.rows = Some(row_lses);
        shifts.cols = Some(col_lses);
        (u, image)
    }
}

fn evaluate(kernel: &LogKernel<'_>, v: &[f64], shifts: &mut WarmShifts) -> Result<Evaluation> {
    let (u, image) = kernel.sweep(v, shifts);
    let error = kernel.marginal_violation(&kernel.log_q, v, &image);
    if !error.is_finite() || u.iter().chain(&image).any(|x| !x.is_finite()) {
        *shifts = WarmShifts::default();
        return Err(Error::NonFinite(format!(
            "Sinkhorn update at lambda = {}",
            kernel.lambda
        )));
    }
    Ok(Evaluation { u, image, error })
}

/// Solves the entropic problem between `mu` and `nu` for the given cost.
///
/// All weights must be strictly positive. When `max_iters` is reached the
/// last iterate is returned with `converged = false`.
pub fn solve(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    cfg: &SolverConfig,
) -> Result<SinkhornSolution> {
    cfg.validate()?;
    let kernel = LogKernel::new(mu, nu, cost, cfg.lambda)?;
    let mut anderson = Anderson::new(cfg.anderson_depth, cfg.anderson_regularization);
    let mut shifts = WarmShifts::default();

    let mut v = vec![0.0; nu.len()];
    let mut current = evaluate(&kernel, &v, &mut shifts)?;
    let mut iterations = 1;
    anderson.push(&v, &current.image);

    while current.error > cfg.marginal_tol && iterations < cfg.max_iters {
        let plain = current.image.clone();
        let (next_v, next) = match anderson.mix() {
            Some(mixed) => {
                let trial = evaluate(&kernel, &mixed, &mut shifts);
                iterations += 1;
                match trial {
                    Ok(eval) if eval.error <= current.error => (mixed, eval),
                    _ => {
                        // mixed iterate made things worse: restart the window
                        anderson.reset();
                        if iterations >= cfg.max_iters {
                            break;
                        }
                        let eval = evaluate(&kernel, &plain, &mut shifts)?;
                        iterations += 1;
                        (plain, eval)
                    }
                }
            }
            None => {
                let eval = evaluate(&kernel, &plain, &mut shifts)?;
                iterations += 1;
                (plain, eval)
            }
        };
        anderson.push(&next_v, &next.image);
        v = next_v;
        current = next;
    }

    let mut sol = SinkhornSolution {
        u: current.u,
        v,
        lambda: cfg.lambda,
        iterations,
        final_marginal_error: current.error,
        cost_max: cost.max_entry(),
        converged: current.error <= cfg.marginal_tol,
    };
    sol.gauge_fix(mu, nu);
    Ok(sol)
}

/// Self-transport problem `T_λ(μ, μ)` through the symmetric averaged update
/// `u ← ½(u + U(u))`, whose fixed point has `u = v`.
///
/// Falls back to [`solve`] when the symmetric iteration stops making progress.
pub fn solve_symmetric(
    mu: &DiscreteMeasure,
    cost: &CostMatrix,
    cfg: &SolverConfig,
) -> Result<SinkhornSolution> {
    cfg.validate()?;
    let kernel = LogKernel::new(mu, mu, cost, cfg.lambda)?;
    let n = mu.len();
    let mut u = vec![0.0; n];
    let mut image = vec![0.0; n];
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let mut iterations = 0;
    let mut lses = Vec::new();

    while iterations < cfg.max_iters {
        kernel.update_u_warm(&u, &mut image, &mut lses);
        iterations += 1;
        if image.iter().any(|x| !x.is_finite()) {
            break;
        }
        // both marginals of the plan built from (u, u) violate by the same amount
        let error = 2.0 * kernel.marginal_violation(&kernel.log_p, &u, &image);
        if error <= cfg.marginal_tol {
            return Ok(SinkhornSolution {
                v: u.clone(),
                u,
                lambda: cfg.lambda,
                iterations,
                final_marginal_error: error,
                cost_max: cost.max_entry(),
                converged: true,
            });
        }
        if error < 0.5 * best {
            best = error;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 50 {
                break;
            }
        }
        for (a, b) in u.iter_mut().zip(&image) {
            *a = 0.5 * (*a + b);
        }
    }

    let mut sol = solve(mu, mu, cost, cfg)?;
    sol.iterations += iterations;
    Ok(sol)
}

/// `T̂ = 2(Σ pᵢuᵢ + Σ qⱼvⱼ)`.
pub fn transport_estimate(sol: &SinkhornSolution, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    2.0 * (dot(mu.weights(), &sol.u) + dot(nu.weights(), &sol.v))
}

/// Log of the total mass `Σ_ij exp((uᵢ + vⱼ − c_ij)/λ) pᵢ qⱼ`.
fn log_plan_mass(
    u: &[f64],
    v: &[f64],
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    lambda: f64,
) -> f64 {
    let inv = 1.0 / lambda;
    let w: Vec<f64> = v
        .iter()
        .zip(nu.weights())
        .map(|(v, q)| v * inv + q.ln())
        .collect();
    let rows: Vec<f64> = u
        .iter()
        .zip(mu.weights())
        .enumerate()
        .map(|(i, (u, p))| u * inv + p.ln() + row_lse(&w, cost.row(i), inv))
        .collect();
    lse(&rows)
}

/// Dual objective
/// `F_λ(u, v) = Σ pᵢuᵢ + Σ qⱼvⱼ + λ(1 − Σ_ij exp((uᵢ + vⱼ − c_ij)/λ) pᵢ qⱼ)`,
/// whose maximum is ½ T_λ.
pub fn dual_objective(
    u: &[f64],
    v: &[f64],
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    lambda: f64,
) -> Result<f64> {
    check_problem(mu, nu, cost)?;
    if u.len() != mu.len() || v.len() != nu.len() {
        return Err(Error::LengthMismatch(u.len() + v.len(), mu.len() + nu.len()));
    }
    let mass = log_plan_mass(u, v, mu, nu, cost, lambda).exp();
    Ok(dot(mu.weights(), u) + dot(nu.weights(), v) + lambda * (1.0 - mass))
}

/// Primal quantities of the plan `γ_ij = exp((uᵢ + vⱼ − c_ij)/λ) pᵢ qⱼ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimalDiagnostics {
    /// `Σ 2c_ij γ_ij`, the full squared-distance transport cost.
    pub linear_cost: f64,
    /// `H(γ | μ⊗ν) = Σ γ_ij log(γ_ij / pᵢqⱼ)`.
    pub relative_entropy: f64,
    pub plan_mass: f64,
}

impl PrimalDiagnostics {
    /// Primal objective `linear_cost + 2λ H`.
    pub fn primal_value(&self, lambda: f64) -> f64 {
        self.linear_cost + 2.0 * lambda * self.relative_entropy
    }
}

pub fn primal_diagnostics(
    sol: &SinkhornSolution,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
) -> Result<PrimalDiagnostics> {
    check_problem(mu, nu, cost)?;
    let inv = 1.0 / sol.lambda;
    let mut out = PrimalDiagnostics {
        linear_cost: 0.0,
        relative_entropy: 0.0,
        plan_mass: 0.0,
    };
    for (i, (&ui, &pi)) in sol.u.iter().zip(mu.weights()).enumerate() {
        for (j, (&vj, &qj)) in sol.v.iter().zip(nu.weights()).enumerate() {
            let c = cost.get(i, j);
            let a = (ui + vj - c) * inv;
            let g = a.exp() * pi * qj;
            out.linear_cost += 2.0 * c * g;
            out.relative_entropy += g * a;
            out.plan_mass += g;
        }
    }
    Ok(out)
}

/// Worst-case gap `2‖c‖²_∞ / (λk)` between the k-th Sinkhorn estimate and
/// the converged entropic cost.
pub fn suboptimality_bound(k: usize, lambda: f64, cost_max: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("iteration count must be at least 1".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda {lambda}")));
    }
    Ok(2.0 * cost_max * cost_max / (lambda * k as f64))
}

//! Exact transport oracles: quantile coupling on the line, cut search on the
//! circle, and a dense linear assignment solver for uniform point clouds.

use crate::measures::{cost_matrix, half_sq_dist, torus_displacement, DiscreteMeasure, Geometry};
use crate::{Error, Result};

mod lapjv;

/// Sorted support points with cumulative weights (right-continuous CDF).
#[derive(Debug, Clone, PartialEq)]
pub struct CdfRepresentation {
    points: Vec<f64>,
    cumulative: Vec<f64>,
}

impl CdfRepresentation {
    /// CDF of a one-dimensional measure. Atoms at equal positions are merged.
    pub fn new(measure: &DiscreteMeasure) -> Result<Self> {
        if measure.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: measure.dim(),
            });
        }
        let mut atoms: Vec<(f64, f64)> = measure
            .points()
            .iter()
            .copied()
            .zip(measure.weights().iter().copied())
            .filter(|&(_, w)| w > 0.0)
            .collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut points = Vec::with_capacity(atoms.len());
        let mut cumulative: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut total = 0.0;
        for (x, w) in atoms {
            total += w;
            if points.last() == Some(&x) {
                *cumulative.last_mut().unwrap() = total;
            } else {
                points.push(x);
                cumulative.push(total);
            }
        }
        // exact unit total so the quantile walk ends cleanly
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(Self { points, cumulative })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    fn mass(&self, j: usize) -> f64 {
        self.cumulative[j] - if j == 0 { 0.0 } else { self.cumulative[j - 1] }
    }

    /// Index of the atom carrying quantile level `r ∈ [0, 1)`.
    fn atom_at(&self, r: f64) -> usize {
        self.cumulative
            .partition_point(|&c| c <= r)
            .min(self.points.len() - 1)
    }
}

/// One block of the monotone coupling: `mass` moves from μ-atom `i` to
/// ν-atom `j` translated by `shift` (always 0 on the line).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Block {
    i: usize,
    j: usize,
    shift: f64,
    mass: f64,
}

/// Monotone coupling of `Q_μ(t)` with `Q_ν(t + θ)`, where the ν quantile is
/// extended periodically by `Q_ν(s + 1) = Q_ν(s) + 1`. With `θ = 0` and no
/// wrap-around this is the quantile coupling on the line.
fn lifted_coupling(mu: &CdfRepresentation, nu: &CdfRepresentation, theta: f64, mut visit: impl FnMut(Block)) {
    let floor = theta.floor();
    let mut shift = floor;
    let r = theta - floor;
    let mut j = nu.atom_at(r);
    let mut nu_left = nu.cumulative[j] - r;
    let mut i = 0;
    let mut mu_left = mu.mass(0);
    loop {
        let step = mu_left.min(nu_left);
        if step > 0.0 {
            visit(Block { i, j, shift, mass: step });
        }
        mu_left -= step;
        nu_left -= step;
        if mu_left <= 0.0 {
            i += 1;
            if i == mu.points.len() {
                break;
            }
            mu_left = mu.mass(i);
        }
        if nu_left <= 0.0 {
            j += 1;
            if j == nu.points.len() {
                j = 0;
                shift += 1.0;
            }
            nu_left = nu.mass(j);
        }
    }
}

fn line_cost(mu: &CdfRepresentation, nu: &CdfRepresentation, theta: f64) -> f64 {
    let mut total = 0.0;
    lifted_coupling(mu, nu, theta, |b| {
        let d = mu.points[b.i] - nu.points[b.j] - b.shift;
        total += b.mass * d * d;
    });
    total
}

fn require_line(m: &DiscreteMeasure, geometry: Geometry) -> Result<()> {
    if m.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: m.dim(),
        });
    }
    if m.geometry() != geometry {
        return Err(Error::GeometryMismatch);
    }
    Ok(())
}

/// `W₂²` between measures on the real line, `∫₀¹ |Q_μ(t) − Q_ν(t)|² dt`,
/// integrated exactly over the merged breakpoints of the two quantile
/// functions.
pub fn w2sq_line(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    require_line(mu, Geometry::Euclidean)?;
    require_line(nu, Geometry::Euclidean)?;
    let (a, b) = (CdfRepresentation::new(mu)?, CdfRepresentation::new(nu)?);
    Ok(line_cost(&a, &b, 0.0))
}

/// First Kantorovich potential on the circle for the cost `d(x, y)²`,
/// gauge-fixed to zero μ-mean.
///
/// Dual values are stored on the atoms of both measures; off-atom values come
/// from the c-transforms `φ(x) = minⱼ d(x, yⱼ)² − ψⱼ` and
/// `ψ(y) = minᵢ d(xᵢ, y)² − φᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CirclePotential {
    x: Vec<f64>,
    phi: Vec<f64>,
    y: Vec<f64>,
    psi: Vec<f64>,
}

fn circle_sq(a: f64, b: f64) -> f64 {
    let t = torus_displacement(a, b);
    t * t
}

impl CirclePotential {
    pub fn eval(&self, x: f64) -> f64 {
        self.y
            .iter()
            .zip(&self.psi)
            .map(|(&y, &p)| circle_sq(x, y) - p)
            .fold(f64::INFINITY, f64::min)
    }

    /// Second potential `ψ`, the partner of [`eval`](Self::eval).
    pub fn conjugate(&self, y: f64) -> f64 {
        self.x
            .iter()
            .zip(&self.phi)
            .map(|(&x, &p)| circle_sq(x, y) - p)
            .fold(f64::INFINITY, f64::min)
    }

    /// `(xᵢ, φᵢ)` on the atoms of μ.
    pub fn first_atoms(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.phi)
    }

    /// `(yⱼ, ψⱼ)` on the atoms of ν.
    pub fn second_atoms(&self) -> (&[f64], &[f64]) {
        (&self.y, &self.psi)
    }
}

/// `W₂²` between measures on the unit circle and the first potential.
///
/// The circle is cut open at a shift `θ` of the quantile levels: a coarse
/// scan of `cut_resolution` shifts over `[−1, 1]` is refined by golden-section
/// search to 1e-10. Dual values follow the optimal monotone coupling, whose
/// blocks form a path along which `φᵢ + ψⱼ = d(xᵢ, yⱼ)²` fixes each new value.
pub fn w2sq_circle(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cut_resolution: usize,
) -> Result<(f64, CirclePotential)> {
    require_line(mu, Geometry::Torus)?;
    require_line(nu, Geometry::Torus)?;
    if cut_resolution < 2 {
        return Err(Error::InvalidParameter("cut_resolution must be at least 2".into()));
    }
    let (a, b) = (CdfRepresentation::new(mu)?, CdfRepresentation::new(nu)?);
    let cost = |theta: f64| line_cost(&a, &b, theta);

    let step = 2.0 / (cut_resolution - 1) as f64;
    let (best_k, _) = (0..cut_resolution)
        .map(|k| (k, cost(-1.0 + k as f64 * step)))
        .fold((0, f64::INFINITY), |acc, (k, c)| if c < acc.1 { (k, c) } else { acc });
    let centre = -1.0 + best_k as f64 * step;
    let (mut lo, mut hi) = (centre - step, centre + step);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let (mut fc, mut fd) = (cost(c), cost(d));
    while hi - lo > 1e-10 {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = cost(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = cost(d);
        }
    }
    // the cost is piecewise quadratic in θ with kinks at θ = Pᵢ − Cⱼ + k;
    // finish on the nearby kinks or the vertex of the local parabola
    let mid = 0.5 * (lo + hi);
    let mut candidates = vec![centre, lo, hi, mid, 0.0];
    let h = 1e-7;
    let (fl, fm, fr) = (cost(mid - h), cost(mid), cost(mid + h));
    let curvature = fl - 2.0 * fm + fr;
    if curvature > 0.0 {
        candidates.push(mid - 0.5 * h * (fr - fl) / curvature);
    }
    let mut kinks = Vec::new();
    let window = 1e-8;
    for p in std::iter::once(0.0).chain(a.cumulative.iter().copied()) {
        let r = (p - mid).rem_euclid(1.0);
        let k = b.cumulative.partition_point(|&c| c < r);
        for jj in k.saturating_sub(1)..(k + 1).min(b.cumulative.len()) {
            let base = p - b.cumulative[jj];
            let t = base + (mid - base).round();
            if (t - mid).abs() < window {
                kinks.push(t);
            }
        }
        if (r.abs() < window || (1.0 - r) < window) && kinks.len() < 64 {
            kinks.push(p - (p - mid).round());
        }
    }
    kinks.sort_by(|x, y| (x - mid).abs().total_cmp(&(y - mid).abs()));
    candidates.extend(kinks.into_iter().take(32));
    let theta = candidates
        .into_iter()
        .min_by(|x, y| cost(*x).total_cmp(&cost(*y)))
        .unwrap();
    let value = cost(theta);

    let mut phi = vec![f64::NAN; a.points.len()];
    let mut psi = vec![f64::NAN; b.points.len()];
    let mut known_psi: Vec<usize> = Vec::new();
    let mut known_phi: Vec<usize> = Vec::new();
    let mut prev: Option<(usize, f64)> = None;
    lifted_coupling(&a, &b, theta, |blk| {
        let (x, y) = (a.points[blk.i], b.points[blk.j]);
        let c = circle_sq(x, y);
        let disp = torus_displacement(x, y);
        if phi[blk.i].is_nan() && psi[blk.j].is_nan() {
            // the coupling graph breaks here: integrate φ′ = 2(x − T(x))
            // across the gap, then clamp into the range that keeps the new
            // pair feasible against the dual values fixed so far
            let guess = match prev {
                Some((k, d0)) => phi[k] + (x - a.points[k]) * (d0 + disp),
                None => 0.0,
            };
            let upper = known_psi
                .iter()
                .map(|&j| circle_sq(x, b.points[j]) - psi[j])
                .fold(f64::INFINITY, f64::min);
            let lower = c - known_phi
                .iter()
                .map(|&k| circle_sq(a.points[k], y) - phi[k])
                .fold(f64::INFINITY, f64::min);
            phi[blk.i] = if lower <= upper { guess.clamp(lower, upper) } else { guess.min(upper) };
            known_phi.push(blk.i);
        }
        if phi[blk.i].is_nan() {
            phi[blk.i] = c - psi[blk.j];
            known_phi.push(blk.i);
        } else if psi[blk.j].is_nan() {
            psi[blk.j] = c - phi[blk.i];
            known_psi.push(blk.j);
        }
        prev = Some((blk.i, disp));
    });
    let mean: f64 = phi.iter().zip(mu_weights(&a)).map(|(p, w)| p * w).sum();
    phi.iter_mut().for_each(|p| *p -= mean);
    psi.iter_mut().for_each(|p| *p += mean);
    Ok((
        value,
        CirclePotential {
            x: a.points.clone(),
            phi,
            y: b.points.clone(),
            psi,
        },
    ))
}

fn mu_weights(a: &CdfRepresentation) -> impl Iterator<Item = f64> + '_ {
    (0..a.points.len()).map(|i| a.mass(i))
}

/// Minimum-cost perfect matching on a dense `n × n` row-major cost matrix.
/// Returns `assignment[i]`, the column matched to row `i`.
pub fn solve_assignment(cost: &[f64], n: usize) -> Result<Vec<usize>> {
    if cost.len() != n * n {
        return Err(Error::LengthMismatch(cost.len(), n * n));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("assignment cost".into()));
    }
    Ok(lapjv::lapjv(cost, n).0)
}

/// Optimal matching between two equal-size clouds with its dual potential.
#[derive(Debug, Clone)]
pub struct AssignmentSolution {
    /// `assignment[i]` is the target atom matched to source atom `i`.
    pub assignment: Vec<usize>,
    /// `(1/n) Σᵢ d(xᵢ, y_σ(i))²`.
    pub w2sq: f64,
    potential: AssignmentPotential,
}

impl AssignmentSolution {
    pub fn potential(&self) -> &AssignmentPotential {
        &self.potential
    }
}

/// First Kantorovich potential of an assignment problem, extended off the
/// sample as the c-transform `φ(x) = minⱼ d(x, yⱼ)² − 2vⱼ` of the column
/// prices.
#[derive(Debug, Clone)]
pub struct AssignmentPotential {
    targets: DiscreteMeasure,
    prices: Vec<f64>,
}

impl AssignmentPotential {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let g = self.targets.geometry();
        self.targets
            .iter_points()
            .zip(&self.prices)
            .map(|(y, v)| 2.0 * (half_sq_dist(x, y, g) - v))
            .fold(f64::INFINITY, f64::min)
    }

    /// Column prices in half-cost units.
    pub fn prices(&self) -> &[f64] {
        &self.prices
    }
}

/// `(1/n) min_σ Σᵢ d(xᵢ, y_σ(i))²` between two clouds of `n` points; weights
/// are ignored (uniform weights implied).
pub fn assignment_w2sq(x: &DiscreteMeasure, y: &DiscreteMeasure) -> Result<f64> {
    Ok(assignment_solve(x, y)?.w2sq)
}

/// Like [`assignment_w2sq`], also returning the matching and the potential.
pub fn assignment_solve(x: &DiscreteMeasure, y: &DiscreteMeasure) -> Result<AssignmentSolution> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    if x.geometry() != y.geometry() {
        return Err(Error::GeometryMismatch);
    }
    let n = x.len();
    // translations change the cost by row and column constants only, so the
    // optimal matching is unchanged; centring keeps the dual prices small
    // and the augmenting paths short
    let (sigma, prices) = match x.geometry() {
        Geometry::Euclidean => {
            let (xc, x_mean) = centred(x)?;
            let (yc, y_mean) = centred(y)?;
            let (sigma, mut v) = lapjv::lapjv(cost_matrix(&xc, &yc)?.entries(), n);
            // back to the original frame: vⱼ − yⱼ·δ with δ = x̄ − ȳ
            let delta: Vec<f64> = x_mean.iter().zip(&y_mean).map(|(a, b)| a - b).collect();
            for (vj, p) in v.iter_mut().zip(y.iter_points()) {
                *vj -= p.iter().zip(&delta).map(|(a, b)| a * b).sum::<f64>();
            }
            (sigma, v)
        }
        Geometry::Torus => lapjv::lapjv(cost_matrix(x, y)?.entries(), n),
    };
    let total: f64 = sigma
        .iter()
        .enumerate()
        .map(|(i, &j)| half_sq_dist(x.point(i), y.point(j), x.geometry()))
        .sum();
    Ok(AssignmentSolution {
        assignment: sigma,
        w2sq: 2.0 * total / n as f64,
        potential: AssignmentPotential {
            targets: y.clone(),
            prices,
        },
    })
}

fn centred(m: &DiscreteMeasure) -> Result<(DiscreteMeasure, Vec<f64>)> {
    let d = m.dim();
    let mut mean = vec![0.0; d];
    for p in m.iter_points() {
        mean.iter_mut().zip(p).for_each(|(s, v)| *s += v);
    }
    mean.iter_mut().for_each(|s| *s /= m.len() as f64);
    let shift: Vec<f64> = mean.iter().map(|s| -s).collect();
    Ok((m.translated(&shift)?, mean))
}

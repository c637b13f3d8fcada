//! Discrete measures, ground costs and grid discretization.
//!
//! Points are stored row-major in a flat buffer (`n × d`). Under
//! [`Geometry::Torus`] every coordinate lives in `[0, 1)` and distances use
//! the per-coordinate nearest representative `[x − y] ∈ (−½, ½]`.

use crate::{Error, Result};

/// Ambient space of a measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Geometry {
    Euclidean,
    /// Flat unit torus (ℝ/ℤ)ᵈ.
    Torus,
}

/// Weighted atom cloud `Σᵢ wᵢ δ_{xᵢ}` with weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<f64>,
    dim: usize,
    weights: Vec<f64>,
    geometry: Geometry,
}

impl DiscreteMeasure {
    /// Builds a measure from a list of points.
    ///
    /// Weights default to uniform and are normalized to sum to one. Torus
    /// coordinates are wrapped into `[0, 1)`.
    pub fn from_samples(
        points: &[Vec<f64>],
        weights: Option<&[f64]>,
        geometry: Geometry,
    ) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyMeasure)?;
        let dim = first.len();
        let mut flat = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            flat.extend_from_slice(p);
        }
        Self::from_flat(flat, dim, weights.map(<[f64]>::to_vec), geometry)
    }

    /// Builds a measure from a row-major `n × dim` coordinate buffer.
    pub fn from_flat(
        mut points: Vec<f64>,
        dim: usize,
        weights: Option<Vec<f64>>,
        geometry: Geometry,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if points.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if points.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: points.len() % dim,
            });
        }
        if let Some(bad) = points.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("point coordinate {bad}")));
        }
        let n = points.len() / dim;

        let weights = match weights {
            None => vec![1.0 / n as f64; n],
            Some(w) => {
                if w.len() != n {
                    return Err(Error::LengthMismatch(w.len(), n));
                }
                for (index, &value) in w.iter().enumerate() {
                    if !value.is_finite() {
                        return Err(Error::NonFinite(format!("weight {value}")));
                    }
                    if value < 0.0 {
                        return Err(Error::NegativeWeight { index, value });
                    }
                }
                let total: f64 = w.iter().sum();
                if total <= 0.0 {
                    return Err(Error::ZeroMass);
                }
                w.into_iter().map(|x| x / total).collect()
            }
        };

        if geometry == Geometry::Torus {
            for x in points.iter_mut() {
                *x = wrap_unit(*x);
            }
        }

        Ok(Self {
            points,
            dim,
            weights,
            geometry,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Row-major coordinate buffer.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    /// Copy without zero-mass atoms. Fails if nothing remains.
    pub fn without_zero_weights(&self) -> Result<Self> {
        let mut pts = Vec::with_capacity(self.points.len());
        let mut w = Vec::with_capacity(self.len());
        for (p, &wi) in self.iter_points().zip(&self.weights) {
            if wi > 0.0 {
                pts.extend_from_slice(p);
                w.push(wi);
            }
        }
        Self::from_flat(pts, self.dim, Some(w), self.geometry)
    }

    /// Translates every atom by `shift` (wrapped on the torus).
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: shift.len(),
            });
        }
        let pts = self
            .points
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(shift).map(|(a, b)| a + b))
            .collect();
        Self::from_flat(pts, self.dim, Some(self.weights.clone()), self.geometry)
    }

    /// Splits the atoms into the first `⌊n/2⌋` and the remaining ones,
    /// each renormalized.
    pub fn split_halves(&self) -> Result<(Self, Self)> {
        let n = self.len();
        if n < 2 {
            return Err(Error::InvalidParameter(
                "cannot split a measure with fewer than 2 atoms".into(),
            ));
        }
        let half = n / 2;
        let cut = half * self.dim;
        let a = Self::from_flat(
            self.points[..cut].to_vec(),
            self.dim,
            Some(self.weights[..half].to_vec()),
            self.geometry,
        )?;
        let b = Self::from_flat(
            self.points[cut..].to_vec(),
            self.dim,
            Some(self.weights[half..].to_vec()),
            self.geometry,
        )?;
        Ok((a, b))
    }
}

/// Wraps a coordinate into `[0, 1)`.
pub fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid rounds tiny negatives up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Nearest-representative difference `[a − b]` on the unit circle, in `(−½, ½]`.
#[inline]
pub fn torus_displacement(a: f64, b: f64) -> f64 {
    let diff = a - b;
    diff - (diff - 0.5).ceil()
}

/// Half squared geodesic distance between two points.
#[inline]
pub fn half_sq_dist(x: &[f64], y: &[f64], geometry: Geometry) -> f64 {
    let s: f64 = match geometry {
        Geometry::Euclidean => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum(),
        Geometry::Torus => x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let t = torus_displacement(*a, *b);
                t * t
            })
            .sum(),
    };
    0.5 * s
}

/// Dense `n × m` matrix of half squared distances `c_ij = ½ d(xᵢ, yⱼ)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    max_entry: f64,
}

impl CostMatrix {
    /// Wraps a row-major buffer. Entries must be finite and nonnegative.
    pub fn from_entries(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::LengthMismatch(entries.len(), rows * cols));
        }
        let mut max_entry = 0.0f64;
        for &c in &entries {
            if !c.is_finite() || c < 0.0 {
                return Err(Error::InvalidParameter(format!("cost entry {c}")));
            }
            max_entry = max_entry.max(c);
        }
        Ok(Self {
            rows,
            cols,
            entries,
            max_entry,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// ‖c‖_∞.
    pub fn max_entry(&self) -> f64 {
        self.max_entry
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn transpose(&self) -> Self {
        let mut t = vec![0.0; self.entries.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[j * self.rows + i] = self.entries[i * self.cols + j];
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            entries: t,
            max_entry: self.max_entry,
        }
    }
}

/// Cost matrix between the atoms of `mu` (rows) and `nu` (columns).
pub fn cost_matrix(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<CostMatrix> {
    if mu.geometry != nu.geometry {
        return Err(Error::GeometryMismatch);
    }
    if mu.dim != nu.dim {
        return Err(Error::DimensionMismatch {
            expected: mu.dim,
            found: nu.dim,
        });
    }
    let (n, m, d) = (mu.len(), nu.len(), mu.dim);
    // coordinate-major copy of ν so each row is built by contiguous passes
    let mut columns = vec![0.0; d * m];
    for (j, y) in nu.iter_points().enumerate() {
        for (k, &yk) in y.iter().enumerate() {
            columns[k * m + j] = yk;
        }
    }
    let mut entries = vec![0.0; n * m];
    for (x, row) in mu.iter_points().zip(entries.chunks_exact_mut(m.max(1))) {
        for (k, &xk) in x.iter().enumerate() {
            let ys = &columns[k * m..(k + 1) * m];
            match mu.geometry {
                Geometry::Euclidean => {
                    for (r, &yk) in row.iter_mut().zip(ys) {
                        *r += (xk - yk) * (xk - yk);
                    }
                }
                Geometry::Torus => {
                    for (r, &yk) in row.iter_mut().zip(ys) {
                        let t = torus_displacement(xk, yk);
                        *r += t * t;
                    }
                }
            }
        }
        row.iter_mut().for_each(|r| *r *= 0.5);
    }
    let max_entry = entries.iter().copied().fold(0.0, f64::max);
    Ok(CostMatrix {
        rows: n,
        cols: m,
        entries,
        max_entry,
    })
}

/// Regular grid `(ℤ/mℤ)ᵈ · h` on the unit torus, `h = 1/m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    resolution: usize,
    dim: usize,
}

impl GridSpec {
    pub fn new(resolution: usize, dim: usize) -> Result<Self> {
        if resolution == 0 || dim == 0 {
            return Err(Error::InvalidParameter(
                "grid resolution and dimension must be positive".into(),
            ));
        }
        Ok(Self { resolution, dim })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    pub fn n_atoms(&self) -> usize {
        self.resolution.pow(self.dim as u32)
    }

    /// Multi-index of atom `k` (first axis varies slowest).
    fn index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for slot in idx.iter_mut().rev() {
            *slot = k % self.resolution;
            k /= self.resolution;
        }
        idx
    }
}

/// Finite-volume discretization of a density on the torus.
///
/// Atom `k` sits at the grid point `index · h` and carries the mass of its
/// surrounding cell `[x − h/2, x + h/2)ᵈ`, approximated by a composite
/// midpoint rule with `quad_points_per_cell` nodes per axis. Weights are
/// renormalized to sum to one.
pub fn discretize_density<F>(
    density: F,
    grid: GridSpec,
    quad_points_per_cell: usize,
) -> Result<DiscreteMeasure>
where
    F: Fn(&[f64]) -> f64,
{
    if quad_points_per_cell == 0 {
        return Err(Error::InvalidParameter(
            "quad_points_per_cell must be at least 1".into(),
        ));
    }
    let d = grid.dim;
    let h = grid.h();
    let k = quad_points_per_cell;
    let offsets: Vec<f64> = (0..k)
        .map(|l| -0.5 * h + (l as f64 + 0.5) * h / k as f64)
        .collect();
    let nodes_per_cell = k.pow(d as u32);

    let mut points = Vec::with_capacity(grid.n_atoms() * d);
    let mut weights = Vec::with_capacity(grid.n_atoms());
    let mut q = vec![0.0; d];
    for atom in 0..grid.n_atoms() {
        let centre: Vec<f64> = grid.index(atom).iter().map(|&i| i as f64 * h).collect();
        let mut acc = 0.0;
        for node in 0..nodes_per_cell {
            let mut rem = node;
            for axis in (0..d).rev() {
                q[axis] = wrap_unit(centre[axis] + offsets[rem % k]);
                rem /= k;
            }
            let value = density(&q);
            if !value.is_finite() || value < 0.0 {
                return Err(Error::NonFinite(format!(
                    "density returned {value} at {q:?}"
                )));
            }
            acc += value;
        }
        points.extend_from_slice(&centre);
        weights.push(acc / nodes_per_cell as f64);
    }
    DiscreteMeasure::from_flat(points, d, Some(weights), Geometry::Torus)
}

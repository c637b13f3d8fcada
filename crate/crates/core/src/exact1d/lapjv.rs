//! Dense Jonker–Volgenant linear assignment on a row-major cost matrix.
//!
//! Inner loops run `W` independent lanes with selects so they vectorize.

const NONE: usize = usize::MAX;
const W: usize = 8;

/// Smallest and second smallest reduced cost `cᵢⱼ − vⱼ` with their first
/// indices.
fn top_two(row: &[f64], v: &[f64]) -> (f64, usize, f64, usize) {
    let mut m1 = [f64::INFINITY; W];
    let mut m2 = [f64::INFINITY; W];
    let mut i1 = [NONE; W];
    let mut i2 = [NONE; W];
    let split = row.len() - row.len() % W;
    for (b, (cc, vv)) in row[..split].chunks_exact(W).zip(v[..split].chunks_exact(W)).enumerate() {
        for l in 0..W {
            let h = cc[l] - vv[l];
            let j = b * W + l;
            let first = h < m1[l];
            let second = h < m2[l];
            m2[l] = if first { m1[l] } else if second { h } else { m2[l] };
            i2[l] = if first { i1[l] } else if second { j } else { i2[l] };
            m1[l] = if first { h } else { m1[l] };
            i1[l] = if first { j } else { i1[l] };
        }
    }
    let mut cand: Vec<(f64, usize)> = (0..W)
        .flat_map(|l| [(m1[l], i1[l]), (m2[l], i2[l])])
        .filter(|&(_, j)| j != NONE)
        .chain((split..row.len()).map(|j| (row[j] - v[j], j)))
        .collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (u1, j1) = cand[0];
    let (u2, j2) = cand.get(1).copied().unwrap_or((f64::INFINITY, NONE));
    (u1, j1, u2, j2)
}

/// One Dijkstra relaxation through row `i` with offset `h`. Scanned columns
/// hold `−∞` and are never improved. Returns the smallest open distance and
/// its first index.
fn relax(row: &[f64], i: usize, h: f64, v: &[f64], dist: &mut [f64], pred: &mut [u32]) -> (f64, usize) {
    let mut acc = [f64::INFINITY; W];
    let mut idx = [NONE; W];
    let iu = i as u32;
    let split = row.len() - row.len() % W;
    for (b, (((cc, vw), dw), pw)) in row[..split]
        .chunks_exact(W)
        .zip(v[..split].chunks_exact(W))
        .zip(dist[..split].chunks_exact_mut(W))
        .zip(pred[..split].chunks_exact_mut(W))
        .enumerate()
    {
        for l in 0..W {
            let nd = cc[l] - vw[l] - h;
            let better = nd < dw[l];
            dw[l] = if better { nd } else { dw[l] };
            pw[l] = if better { iu } else { pw[l] };
            let key = if dw[l] == f64::NEG_INFINITY { f64::INFINITY } else { dw[l] };
            let take = key < acc[l];
            acc[l] = if take { key } else { acc[l] };
            idx[l] = if take { b * W + l } else { idx[l] };
        }
    }
    let (mut m, mut arg) = (f64::INFINITY, NONE);
    for l in 0..W {
        if acc[l] < m || (acc[l] == m && idx[l] < arg) {
            m = acc[l];
            arg = idx[l];
        }
    }
    for j in split..row.len() {
        let nd = row[j] - v[j] - h;
        if nd < dist[j] {
            dist[j] = nd;
            pred[j] = iu;
        }
        if dist[j] != f64::NEG_INFINITY && dist[j] < m {
            m = dist[j];
            arg = j;
        }
    }
    (m, arg)
}

/// Candidate columns per row in the sparse phase.
const DEGREE: usize = 48;
/// Verification rounds before the dense fallback.
const MAX_ROUNDS: usize = 30;
/// Sizes up to this are solved densely.
const SPARSE_MIN: usize = 1024;
/// Subsampling factor of the price-initializing problem.
const COARSENING: usize = 4;

/// Partial assignment with column prices; every assigned row is matched to
/// a column of minimal reduced cost `cᵢⱼ − vⱼ` among the edges considered.
struct State<'a> {
    cost: &'a [f64],
    n: usize,
    rowsol: Vec<usize>,
    colsol: Vec<usize>,
    v: Vec<f64>,
    dist: Vec<f64>,
    pred: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry(f64, u32);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // reversed: BinaryHeap pops the smallest distance, then the smallest column
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl<'a> State<'a> {
    /// Nothing assigned, given prices.
    fn empty(cost: &'a [f64], n: usize, v: Vec<f64>) -> Self {
        Self {
            cost,
            n,
            rowsol: vec![NONE; n],
            colsol: vec![NONE; n],
            v,
            dist: vec![f64::INFINITY; n],
            pred: vec![0; n],
        }
    }

    fn row(&self, i: usize) -> &'a [f64] {
        &self.cost[i * self.n..][..self.n]
    }

    /// Column reduction, reduction transfer and two rounds of augmenting row
    /// reduction. Returns the rows left free.
    fn new(cost: &'a [f64], n: usize) -> (Self, Vec<usize>) {
        let mut s = Self {
            cost,
            n,
            rowsol: vec![NONE; n],
            colsol: vec![NONE; n],
            v: vec![f64::INFINITY; n],
            dist: vec![f64::INFINITY; n],
            pred: vec![0; n],
        };
        let mut matches = vec![0usize; n];

        // column reduction; the first minimising row wins ties
        let mut argmin = vec![0u32; n];
        for i in 0..n {
            let iu = i as u32;
            let row = s.row(i);
            for ((m, a), &cc) in s.v.iter_mut().zip(argmin.iter_mut()).zip(row) {
                let take = cc < *m;
                *m = if take { cc } else { *m };
                *a = if take { iu } else { *a };
            }
        }
        for j in (0..n).rev() {
            let imin = argmin[j] as usize;
            matches[imin] += 1;
            if matches[imin] == 1 {
                s.rowsol[imin] = j;
                s.colsol[j] = imin;
            } else if s.v[j] < s.v[s.rowsol[imin]] {
                let j1 = s.rowsol[imin];
                s.rowsol[imin] = j;
                s.colsol[j] = imin;
                s.colsol[j1] = NONE;
            }
        }

        // reduction transfer
        let mut free = Vec::with_capacity(n);
        for i in 0..n {
            match matches[i] {
                0 => free.push(i),
                1 => {
                    let j1 = s.rowsol[i];
                    let (u1, k1, u2, _) = top_two(s.row(i), &s.v);
                    let min = if k1 == j1 { u2 } else { u1 };
                    if min.is_finite() {
                        s.v[j1] -= min;
                    }
                }
                _ => {}
            }
        }

        // augmenting row reduction
        for _ in 0..2 {
            let mut stack: Vec<usize> = std::mem::take(&mut free).into_iter().rev().collect();
            let mut guard = 0usize;
            while let Some(i) = stack.pop() {
                guard += 1;
                let (umin, mut j1, usubmin, j2) = top_two(s.row(i), &s.v);
                let mut i0 = s.colsol[j1];
                let strict = umin < usubmin;
                if strict {
                    s.v[j1] -= usubmin - umin;
                } else if i0 != NONE && j2 != NONE {
                    j1 = j2;
                    i0 = s.colsol[j2];
                }
                s.rowsol[i] = j1;
                s.colsol[j1] = i;
                if i0 != NONE {
                    s.rowsol[i0] = NONE;
                    // cap the immediate reprocessing so rounding cannot cycle
                    if strict && guard < 10 * n {
                        stack.push(i0);
                    } else {
                        free.push(i0);
                    }
                }
            }
        }
        (s, free)
    }

    /// Moves prices of the scanned columns and flips the path ending at `end`.
    fn finish(&mut self, freerow: usize, end: usize, min: f64, scanned: &[(usize, f64)]) {
        for &(j, dj) in scanned {
            self.v[j] += dj - min;
        }
        let mut j = end;
        loop {
            let i = self.pred[j] as usize;
            self.colsol[j] = i;
            let next = self.rowsol[i];
            self.rowsol[i] = j;
            if i == freerow {
                break;
            }
            j = next;
        }
    }

    /// Shortest augmenting path from `freerow` over all columns.
    fn augment_dense(&mut self, freerow: usize, scanned: &mut Vec<(usize, f64)>) {
        scanned.clear();
        self.dist.fill(f64::INFINITY);
        let (mut min, mut j1) = relax(self.row(freerow), freerow, 0.0, &self.v, &mut self.dist, &mut self.pred);
        while self.colsol[j1] != NONE {
            scanned.push((j1, min));
            self.dist[j1] = f64::NEG_INFINITY;
            let i = self.colsol[j1];
            let h = self.row(i)[j1] - self.v[j1] - min;
            (min, j1) = relax(self.row(i), i, h, &self.v, &mut self.dist, &mut self.pred);
        }
        self.finish(freerow, j1, min, scanned);
    }

    fn relax_sparse(
        &mut self,
        i: usize,
        h: f64,
        cols: &[u32],
        touched: &mut Vec<usize>,
        heap: &mut std::collections::BinaryHeap<Entry>,
    ) {
        let row = self.row(i);
        for &j in cols {
            let j = j as usize;
            let nd = row[j] - self.v[j] - h;
            if nd < self.dist[j] {
                if self.dist[j] == f64::INFINITY {
                    touched.push(j);
                }
                self.dist[j] = nd;
                self.pred[j] = i as u32;
                heap.push(Entry(nd, j as u32));
            }
        }
    }

    /// Shortest augmenting path from `freerow` along the candidate edges.
    /// Returns false, leaving the state untouched, when no free column is
    /// reachable.
    fn augment_sparse(
        &mut self,
        freerow: usize,
        adj: &[Vec<u32>],
        scanned: &mut Vec<(usize, f64)>,
        touched: &mut Vec<usize>,
        heap: &mut std::collections::BinaryHeap<Entry>,
    ) -> bool {
        scanned.clear();
        touched.clear();
        heap.clear();
        self.relax_sparse(freerow, 0.0, &adj[freerow], touched, heap);
        let mut end = None;
        while let Some(Entry(d, j)) = heap.pop() {
            let j = j as usize;
            if d != self.dist[j] {
                continue;
            }
            if self.colsol[j] == NONE {
                end = Some((j, d));
                break;
            }
            scanned.push((j, d));
            self.dist[j] = f64::NEG_INFINITY;
            let i = self.colsol[j];
            let h = self.row(i)[j] - self.v[j] - d;
            self.relax_sparse(i, h, &adj[i], touched, heap);
        }
        for &j in touched.iter() {
            self.dist[j] = f64::INFINITY;
        }
        match end {
            Some((j, min)) => {
                self.finish(freerow, j, min, scanned);
                true
            }
            None => false,
        }
    }

    /// Rows whose matched column is not of minimal reduced cost over all
    /// columns, beyond `tol`.
    fn violations(&self, tol: f64) -> Vec<usize> {
        (0..self.n)
            .filter(|&i| {
                let j = self.rowsol[i];
                let row = self.row(i);
                let u = row[j] - self.v[j];
                let (best, _, _, _) = top_two(row, &self.v);
                best < u - tol
            })
            .collect()
    }
}

/// Reduced costs of a row, its `k` cheapest columns and its cheapest column.
fn candidates(row: &[f64], v: &[f64], k: usize, red: &mut Vec<f64>, scratch: &mut Vec<f64>) -> (Vec<u32>, usize) {
    red.clear();
    red.extend(row.iter().zip(v).map(|(c, vj)| c - vj));
    let k = k.min(red.len());
    scratch.clear();
    scratch.extend_from_slice(red);
    let (_, &mut theta, _) = scratch.select_nth_unstable_by(k - 1, f64::total_cmp);
    let mut out = Vec::with_capacity(k + 4);
    let mut best = (f64::INFINITY, NONE);
    for (j, &r) in red.iter().enumerate() {
        if r <= theta && out.len() < k {
            out.push(j as u32);
            if r < best.0 {
                best = (r, j);
            }
        }
    }
    (out, best.1)
}

/// Column prices from an assignment on a strided subsample, extended to
/// all columns by the c-transform `vⱼ = minᵣ (c_rj − u_r)`.
fn coarse_prices(cost: &[f64], n: usize, degree: usize, dense_max: usize) -> Vec<f64> {
    let m = n / COARSENING;
    let idx: Vec<usize> = (0..m).map(|k| k * n / m).collect();
    let sub: Vec<f64> = idx.iter().flat_map(|&i| idx.iter().map(move |&j| cost[i * n + j])).collect();
    let (sigma, vs) = lapjv_with_degree(&sub, m, degree, dense_max);
    let mut v = vec![f64::INFINITY; n];
    for (r, &i) in idx.iter().enumerate() {
        let u = sub[r * m + sigma[r]] - vs[sigma[r]];
        for (vj, &c) in v.iter_mut().zip(&cost[i * n..][..n]) {
            *vj = vj.min(c - u);
        }
    }
    v
}

/// Minimum-cost perfect matching. Returns the column of each row and the
/// column prices `v`, with `cᵢⱼ − vⱼ ≥ cᵢσ(i) − vσ(i)` at the optimum.
///
/// Small instances: column reduction, two rounds of augmenting row
/// reduction, then dense shortest augmenting paths for the rows still free.
/// Large instances start from prices of a subsampled problem, search paths
/// over each row's cheapest reduced-cost columns, then check the optimality
/// conditions on the full matrix and repeat for offending rows.
pub(crate) fn lapjv(cost: &[f64], n: usize) -> (Vec<usize>, Vec<f64>) {
    lapjv_with_degree(cost, n, DEGREE, SPARSE_MIN)
}

/// Sizes up to `dense_max.max(4 * degree)` are solved densely.
pub(crate) fn lapjv_with_degree(cost: &[f64], n: usize, degree: usize, dense_max: usize) -> (Vec<usize>, Vec<f64>) {
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    assert!(n < u32::MAX as usize, "assignment size exceeds u32 indexing");
    let mut scanned = Vec::new();
    if n <= dense_max.max(4 * degree) {
        let (mut s, free) = State::new(cost, n);
        for &i in &free {
            s.augment_dense(i, &mut scanned);
        }
        return (s.rowsol, s.v);
    }

    // greedy start: each row takes its cheapest column under the coarse
    // prices unless another row already holds it
    let mut s = State::empty(cost, n, coarse_prices(cost, n, degree, dense_max));
    let (mut red, mut scratch) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut adj = Vec::with_capacity(n);
    let mut free = Vec::new();
    let mut listed = vec![false; n];
    for i in 0..n {
        let (cols, best) = candidates(s.row(i), &s.v, degree, &mut red, &mut scratch);
        cols.iter().for_each(|&j| listed[j as usize] = true);
        adj.push(cols);
        if s.colsol[best] == NONE {
            s.rowsol[i] = best;
            s.colsol[best] = i;
        } else {
            free.push(i);
        }
    }
    // columns nobody lists link to their cheapest rows
    let per_column = (degree / 4).max(1);
    for j in (0..n).filter(|&j| !listed[j]) {
        red.clear();
        red.extend((0..n).map(|i| cost[i * n + j]));
        scratch.clear();
        scratch.extend_from_slice(&red);
        let (_, &mut theta, _) = scratch.select_nth_unstable_by(per_column - 1, f64::total_cmp);
        let mut added = 0;
        for (i, &c) in red.iter().enumerate() {
            if c <= theta && added < per_column {
                adj[i].push(j as u32);
                added += 1;
            }
        }
    }

    let scale = cost.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let tol = 1e-13 * scale;
    let mut touched = Vec::new();
    let mut heap = std::collections::BinaryHeap::new();
    for _ in 0..MAX_ROUNDS {
        for &i in &free {
            if !s.augment_sparse(i, &adj, &mut scanned, &mut touched, &mut heap) {
                // nothing free is reachable: link the row to free columns
                let row = s.row(i);
                let mut near: Vec<(f64, u32)> = (0..n)
                    .filter(|&j| s.colsol[j] == NONE)
                    .map(|j| (row[j] - s.v[j], j as u32))
                    .collect();
                near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                adj[i].extend(near.iter().take(degree).map(|&(_, j)| j));
                let found = s.augment_sparse(i, &adj, &mut scanned, &mut touched, &mut heap);
                debug_assert!(found);
            }
        }
        free = s.violations(tol);
        if free.is_empty() {
            return (s.rowsol, s.v);
        }
        for &i in &free {
            let j = s.rowsol[i];
            s.rowsol[i] = NONE;
            s.colsol[j] = NONE;
            let (cols, _) = candidates(s.row(i), &s.v, degree, &mut red, &mut scratch);
            for c in cols {
                if !adj[i].contains(&c) {
                    adj[i].push(c);
                }
            }
        }
    }
    // give up on the candidate graph: restart from scratch, fully dense
    let (mut s, free) = State::new(cost, n);
    for &i in &free {
        s.augment_dense(i, &mut scanned);
    }
    (s.rowsol, s.v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn total(cost: &[f64], n: usize, sigma: &[usize]) -> f64 {
        sigma.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum()
    }

    fn check_duals(cost: &[f64], n: usize, sigma: &[usize], v: &[f64]) {
        for i in 0..n {
            let u = cost[i * n + sigma[i]] - v[sigma[i]];
            for j in 0..n {
                assert!(cost[i * n + j] - v[j] >= u - 1e-9, "row {i} col {j}");
            }
        }
    }

    #[test]
    fn sparse_search_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (n, degree, d) in [(300, 2, 2), (500, 4, 3), (400, 16, 5), (257, 64, 1)] {
            let x: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>()).collect();
            let y: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>()).collect();
            let cost: Vec<f64> = (0..n * n)
                .map(|k| {
                    let (i, j) = (k / n, k % n);
                    (0..d).map(|t| (x[i * d + t] - y[j * d + t]).powi(2)).sum()
                })
                .collect();
            let (dense, _) = lapjv_with_degree(&cost, n, n, n);
            let (sparse, v) = lapjv_with_degree(&cost, n, degree, 16);
            let mut seen = vec![false; n];
            sparse.iter().for_each(|&j| seen[j] = true);
            assert!(seen.iter().all(|&b| b));
            assert!((total(&cost, n, &dense) - total(&cost, n, &sparse)).abs() < 1e-9, "n={n} degree={degree}");
            check_duals(&cost, n, &sparse, &v);
        }
    }

    #[test]
    fn sparse_search_handles_ties() {
        // all rows share one cost profile: every matching of equal-cost
        // columns is optimal and the candidate graph is highly degenerate
        let n = 260;
        let cost: Vec<f64> = (0..n * n).map(|k| ((k % n) / 10) as f64).collect();
        let (sigma, v) = lapjv_with_degree(&cost, n, 3, 16);
        let mut seen = vec![false; n];
        sigma.iter().for_each(|&j| seen[j] = true);
        assert!(seen.iter().all(|&b| b));
        check_duals(&cost, n, &sigma, &v);
    }
}

//! Type-II Anderson mixing for fixed-point maps `x ↦ g(x)`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

/// Sliding window of past iterates and their images.
#[derive(Debug, Clone)]
pub(crate) struct Anderson {
    depth: usize,
    regularization: f64,
    xs: VecDeque<Vec<f64>>,
    gs: VecDeque<Vec<f64>>,
}

impl Anderson {
    pub(crate) fn new(depth: usize, regularization: f64) -> Self {
        Self {
            depth,
            regularization,
            xs: VecDeque::with_capacity(depth + 1),
            gs: VecDeque::with_capacity(depth + 1),
        }
    }

    pub(crate) fn push(&mut self, x: &[f64], g: &[f64]) {
        if self.depth == 0 {
            return;
        }
        if self.xs.len() == self.depth + 1 {
            self.xs.pop_front();
            self.gs.pop_front();
        }
        self.xs.push_back(x.to_vec());
        self.gs.push_back(g.to_vec());
    }

    pub(crate) fn reset(&mut self) {
        self.xs.clear();
        self.gs.clear();
    }

    /// Mixed iterate `g_k − ΔG γ` where `γ` minimizes
    /// `‖f_k − ΔF γ‖² + reg · tr(ΔFᵀΔF) · ‖γ‖²`, `f = g − x`.
    ///
    /// Returns `None` until two pairs are stored or if the least-squares
    /// system is degenerate.
    pub(crate) fn mix(&self) -> Option<Vec<f64>> {
        let len = self.xs.len();
        if len < 2 {
            return None;
        }
        let k = len - 1;
        let n = self.xs[0].len();
        let residual = |i: usize| -> Vec<f64> {
            self.gs[i].iter().zip(&self.xs[i]).map(|(g, x)| g - x).collect()
        };
        let f: Vec<Vec<f64>> = (0..len).map(residual).collect();
        let df: Vec<Vec<f64>> = (0..k)
            .map(|i| f[i + 1].iter().zip(&f[i]).map(|(a, b)| a - b).collect())
            .collect();

        let mut gram = DMatrix::<f64>::zeros(k, k);
        let mut rhs = DVector::<f64>::zeros(k);
        for a in 0..k {
            for b in a..k {
                let dot: f64 = df[a].iter().zip(&df[b]).map(|(x, y)| x * y).sum();
                gram[(a, b)] = dot;
                gram[(b, a)] = dot;
            }
            rhs[a] = df[a].iter().zip(&f[k]).map(|(x, y)| x * y).sum();
        }
        let trace = gram.trace();
        if !(trace > 0.0) || !trace.is_finite() {
            return None;
        }
        for a in 0..k {
            gram[(a, a)] += self.regularization * trace;
        }
        let gamma = gram.cholesky()?.solve(&rhs);
        if gamma.iter().any(|g| !g.is_finite()) {
            return None;
        }

        let mut out = self.gs[k].clone();
        for (i, &gi) in gamma.iter().enumerate() {
            let (next, prev) = (&self.gs[i + 1], &self.gs[i]);
            for t in 0..n {
                out[t] -= gi * (next[t] - prev[t]);
            }
        }
        Some(out)
    }
}

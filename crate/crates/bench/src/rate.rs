use crate::{BenchError, Estimator, Result};

/// Predicted convergence rate `n^exponent`, possibly with a log factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    pub exponent: f64,
    pub log_factor: bool,
}

/// Sample-complexity exponent of an estimator of `W₂²` in dimension `d`.
///
/// Plug-in: `−2/d` for `d > 4`, `−1/2` below (with a log factor at `d = 4`).
/// `S` with `λ ≍ n^{−1/(d′+4)}`: `−2/(d′+4)`; `R` with `λ ≍ n^{−1/(d′+8)}`:
/// `−4/(d′+8)`, where `d′ = 2⌊d/2⌋`. `T` at fixed λ has no rate.
pub fn theoretical_rate(d: usize, estimator: Estimator) -> Result<Rate> {
    if d == 0 {
        return Err(BenchError::Config("dimension must be at least 1".into()));
    }
    let dp = (2 * (d / 2)) as f64;
    let rate = |exponent| Rate {
        exponent,
        log_factor: false,
    };
    match estimator {
        Estimator::Plugin if d > 4 => Ok(rate(-2.0 / d as f64)),
        Estimator::Plugin => Ok(Rate {
            exponent: -0.5,
            log_factor: d == 4,
        }),
        Estimator::S => Ok(rate(-2.0 / (dp + 4.0))),
        Estimator::R => Ok(rate(-4.0 / (dp + 8.0))),
        Estimator::T => Err(BenchError::Config("T_λ at fixed λ has no rate in n".into())),
    }
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(BenchError::Config("slope fit needs two or more paired points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 || !sxy.is_finite() {
        return Err(BenchError::Config("degenerate slope fit".into()));
    }
    Ok(sxy / sxx)
}

/// Slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(BenchError::Config("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    ols_slope(&lx, &ly)
}

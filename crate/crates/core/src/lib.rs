//! # w2est
//!
//! Estimators of the squared Wasserstein distance W₂²(μ, ν) built on
//! entropy-regularized optimal transport.
//!
//! The entropic cost with quadratic ground cost is
//!
//! ```text
//! T_λ(μ, ν) = min_{γ ∈ Π(μ,ν)} ∫ ‖y − x‖² dγ + 2λ H(γ | μ⊗ν)
//! ```
//!
//! and three estimators of W₂² = T₀ are provided on top of it:
//!
//! | Estimator | Definition | Bias in λ |
//! |-----------|------------|-----------|
//! | [`estimators::entropic_cost`] | T_λ | O(λ log 1/λ) |
//! | [`estimators::sinkhorn_divergence`] | S_λ = T_λ(μ,ν) − ½(T_λ(μ,μ) + T_λ(ν,ν)) | O(λ²) |
//! | [`estimators::richardson`] | R_λ = 2S_λ − S_{√2λ} | o(λ²) |
//!
//! ## Modules
//!
//! - [`measures`]: discrete measures on ℝᵈ or the flat torus, cost matrices, grid discretization
//! - [`sinkhorn`]: log-domain Sinkhorn solver with Anderson acceleration and dual diagnostics
//! - [`estimators`]: the estimators above plus smooth dual-potential reconstructions
//! - [`gaussian`]: closed forms for Gaussian measures (Bures, W₂², T_λ, small-λ expansion)
//! - [`sampling`]: compactly supported elliptical sampler with known covariance and transport map
//! - [`exact1d`]: exact oracles (quantile coupling on the line, cut search on the circle, assignment)
//!
//! ## Quick start
//!
//! ```rust
//! use w2est::measures::{DiscreteMeasure, Geometry};
//! use w2est::sinkhorn::SolverConfig;
//! use w2est::estimators::{sinkhorn_divergence, DivergenceOptions};
//!
//! let mu = DiscreteMeasure::from_samples(&[vec![0.0], vec![1.0]], None, Geometry::Euclidean).unwrap();
//! let nu = DiscreteMeasure::from_samples(&[vec![0.5], vec![1.5]], None, Geometry::Euclidean).unwrap();
//! let cfg = SolverConfig::new(0.1);
//! let report = sinkhorn_divergence(&mu, &nu, &cfg, DivergenceOptions::default()).unwrap();
//! assert!((report.value - 0.25).abs() < 1e-2);
//! ```

use thiserror::Error;

pub mod estimators;
pub mod exact1d;
pub mod gaussian;
mod lse;
pub mod measures;
pub mod sampling;
pub mod sinkhorn;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("measure has no atoms")]
    EmptyMeasure,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("weights sum to zero")]
    ZeroMass,

    #[error("zero-weight atom at index {0}; drop zero-mass atoms before solving")]
    ZeroWeightAtom(usize),

    #[error("geometry mismatch between measures")]
    GeometryMismatch,

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),

    #[error("matrix is ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),

    #[error("regularization mismatch: {0} vs {1}")]
    LambdaMismatch(f64, f64),
}

pub type Result<T> = std::result::Result<T, Error>;

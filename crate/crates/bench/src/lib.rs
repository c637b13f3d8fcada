//! Benchmark harness for the `w2est` estimators.
//!
//! Each runner samples problem instances with a known answer, evaluates the
//! requested estimators over independent trials and aggregates the absolute
//! cost error and the L¹ error on the first potential. Results are written as
//! space-separated tables:
//!
//! ```text
//! # ground_truth=elliptic_bures potential=elliptic_quadratic gauge=mean_zero
//! Nsamples error_on_cost std_on_cost error_on_potentials std_on_potentials
//! 100 1.2e-1 3.4e-2 ...
//! ```
//!
//! λ-sweeps use `blur` as the first column. One file is written per
//! estimator, with the estimator name appended to the output stem.

pub mod config;
mod error;
pub mod rate;
pub mod runners;
pub mod setup;
pub mod table;
pub mod trial;

pub use config::{Estimator, Experiment, ExperimentConfig, Law};
pub use error::{BenchError, Result};
pub use rate::{ols_slope, theoretical_rate, Rate};

//! Multi-epoch experiments scored against ground truth.
//!
//! Differential-range RMSE is pooled over every exchange of every epoch.
//! Relative-range errors are collected for exchange pairs a fixed time gap
//! apart and, wrapped to one half-wavelength cycle, binned into a PDF.

mod metrics;
mod sweep;

pub use metrics::{
    differential_errors, gap_pairs, linear_fit, relative_error_pdf, relative_errors, rmse_differential, rmse_mm,
    wrap_period_m, Histogram, LinearFit,
};
pub use sweep::{epoch_seeds, run_sweep, speed_knee, Axis, Report, ReportRow, SweepSpec, DEFAULT_EPOCHS, DEFAULT_HIST_BINS};

use thiserror::Error;

use crate::estimator::EstimatorError;
use crate::scenario::ScenarioError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("estimate covers {est} exchanges, truth has {truth}")]
    LengthMismatch { est: usize, truth: usize },
    #[error("estimate and truth disagree on exchange labels at position {position}")]
    Misaligned { position: usize },
    #[error("no exchange pairs {gap_s} s apart")]
    NoPairs { gap_s: f64 },
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("histograms are not comparable: {0}")]
    Incomparable(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

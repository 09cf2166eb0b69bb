use thiserror::Error;

use crate::estimator::EstimatorError;
use crate::evaluation::EvalError;
use crate::io::IoError;
use crate::scenario::ScenarioError;
use crate::waveform::WaveformError;

/// Crate-level error, wrapping the per-module errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Waveform(#[from] WaveformError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] IoError),
}

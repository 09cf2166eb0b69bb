//! Range estimation from CSI and timestamps.
//!
//! Per exchange: symbol delays by root-MUSIC, carrier phases `ψ2`, `ψ4` by
//! delay-compensated CSI summation. Across exchanges: windowed CFO
//! refinement, the sum-CP `Ψ`, and differential/relative range from
//! wrapped `Ψ` increments. The FTM round-trip estimate is the baseline.

mod cfo;
mod ftm;
mod pipeline;
mod ranging;
mod root_music;

pub use cfo::{refine_cfo, CfoSearch, CfoTrack, CfoWindow};
pub use ftm::{ftm_differential, ftm_range};
pub use pipeline::{estimate_epoch, estimate_from_pairs, extract_pairs, EpochEstimate, ExtractedPairs, Method, PipelineConfig};
pub use ranging::{
    differential_range, differential_range_robust, max_resolvable_speed, percentile_nearest_rank, relative_range,
    sum_cp, sum_cp_series, RangeSeries, RangeStep, SumCp, SumCpSeries, ThetaForm,
};
pub use root_music::{estimate_symbol_delay, root_music_candidates, RootCandidate, ROOT_BAND};

use std::f64::consts::TAU;

use num_complex::Complex64;
use thiserror::Error;

use crate::phase::wrap;
use crate::waveform::{CsiVector, OfdmConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("estimation failed: {0}")]
    EstimationFailure(String),
    #[error("carrier phase undefined: CSI sums to zero")]
    UndefinedPhase,
    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },
}

/// Carrier-phase estimates of one exchange.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpPair {
    pub p: usize,
    pub psi2_rad: f64,
    pub psi4_rad: f64,
    pub t1_s: f64,
    pub t4_s: f64,
    pub coarse_cfo_hz: f64,
}

/// `ψ = ∠ Σ_k h_k e^{−j2π k τ̂/Ts}`, wrapped to `[−π, π)`.
pub fn extract_cp(csi: &CsiVector, tau_hat_s: f64, cfg: &OfdmConfig) -> Result<f64, EstimatorError> {
    if !tau_hat_s.is_finite() {
        return Err(EstimatorError::InvalidInput(format!("delay estimate {tau_hat_s}")));
    }
    if csi.len() != cfg.num_subcarriers {
        return Err(EstimatorError::InvalidInput(format!(
            "CSI has {} entries, configuration expects {}",
            csi.len(),
            cfg.num_subcarriers
        )));
    }
    let step = -TAU * tau_hat_s / cfg.ts_s;
    let acc: Complex64 = csi
        .values()
        .iter()
        .zip(cfg.subcarriers())
        .map(|(h, k)| h * Complex64::from_polar(1.0, step * k as f64))
        .sum();
    if acc.norm() == 0.0 || !acc.is_finite() {
        return Err(EstimatorError::UndefinedPhase);
    }
    Ok(wrap(acc.arg()))
}

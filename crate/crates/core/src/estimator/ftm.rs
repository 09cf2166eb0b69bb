//! FTM round-trip baseline with symbol-delay and CFO corrections.

use crate::scenario::MeasurementRecord;
use crate::SPEED_OF_LIGHT;

/// `Â = (c/2)·(t4 − τ̂4 − t1 − (t3 − t2 + τ̂2)/(1 + f̄/fc))`.
pub fn ftm_range(record: &MeasurementRecord, tau2_hat_s: f64, tau4_hat_s: f64, fc_hz: f64) -> f64 {
    let turnaround = (record.t3_s - record.t2_s + tau2_hat_s) / (1.0 + record.coarse_cfo_hz / fc_hz);
    0.5 * SPEED_OF_LIGHT * (record.t4_s - tau4_hat_s - record.t1_s - turnaround)
}

/// Differences of consecutive absolute estimates.
pub fn ftm_differential(absolute_m: &[f64]) -> Vec<f64> {
    absolute_m.windows(2).map(|w| w[1] - w[0]).collect()
}

//! Simulated measurement epochs.
//!
//! An epoch is one run of the frame-exchange protocol between a fixed STA 1
//! and a moving STA 2 inside a rectangular room. Each exchange `p` yields a
//! [`MeasurementRecord`] (what the stations observe) and an
//! [`ExchangeTruth`] (what actually happened).

mod channel;
mod epoch;
mod schedule;
mod trajectory;

pub use channel::realize_channel;
pub use epoch::{simulate_epoch, simulate_epoch_seeded};
pub use schedule::schedule_exchanges;
pub use trajectory::{waypoint_trajectory, Trajectory};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::waveform::{CsiVector, ImpairmentDraw, OfdmConfig, WaveformError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario configuration: {0}")]
    Config(String),
    #[error("schedule is not strictly increasing: {0}")]
    Schedule(String),
    #[error("degenerate geometry: {0}")]
    Geometry(String),
    #[error(transparent)]
    Waveform(#[from] WaveformError),
}

/// A point in the room plane (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoomConfig {
    pub width_m: f64,
    pub height_m: f64,
    pub sta1_x_m: f64,
    pub sta1_y_m: f64,
}

impl Default for RoomConfig {
    fn default() -> Self {
        Self {
            width_m: 5.0,
            height_m: 5.0,
            sta1_x_m: 2.5,
            sta1_y_m: 2.5,
        }
    }
}

impl RoomConfig {
    pub fn sta1(&self) -> Point {
        Point::new(self.sta1_x_m, self.sta1_y_m)
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0.0..=self.width_m).contains(&p.x) && (0.0..=self.height_m).contains(&p.y)
    }
}

/// Nested-array transmit schedule: every `group_period_s`, `inner_count`
/// closely spaced (jittered) exchanges followed by evenly spaced outer ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub group_period_s: f64,
    pub group_size: usize,
    pub inner_count: usize,
    pub inner_spacing_s: f64,
    pub outer_spacing_s: f64,
    pub jitter_s: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            group_period_s: 0.5,
            group_size: 24,
            inner_count: 5,
            inner_spacing_s: 300e-6,
            outer_spacing_s: 0.025,
            jitter_s: 100e-6,
        }
    }
}

/// Sinusoidal crystal drift `η(t) = mean + amplitude·sin(ω t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OscillatorConfig {
    pub mean: f64,
    pub amplitude: f64,
    pub angular_rate_rad_s: f64,
    /// Fixed sinusoid phase; drawn uniformly per epoch when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_rad: Option<f64>,
}

impl Default for OscillatorConfig {
    fn default() -> Self {
        Self {
            mean: 0.5e-5,
            amplitude: 0.1e-5,
            angular_rate_rad_s: 0.05 * std::f64::consts::PI,
            phase_rad: None,
        }
    }
}

/// Crystal offset at time `t_s`.
pub fn oscillator_offset(t_s: f64, osc: &OscillatorConfig, phase_rad: f64) -> f64 {
    osc.mean + osc.amplitude * (osc.angular_rate_rad_s * t_s + phase_rad).sin()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub ofdm: OfdmConfig,
    pub rotation_modulus: u32,
    pub cfo_precision_hz: f64,
    pub room: RoomConfig,
    pub speed_mps: f64,
    pub duration_s: f64,
    #[serde(with = "crate::io::extended_f64")]
    pub kappa: f64,
    pub delta_rho_s: f64,
    pub frame_duration_s: f64,
    pub sifs_s: f64,
    pub schedule: ScheduleConfig,
    pub oscillator: OscillatorConfig,
    #[serde(with = "crate::io::extended_f64")]
    pub snr_db: f64,
    pub tau_min_s: f64,
    pub tau_max_s: f64,
    pub timestamp_quantum_s: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            ofdm: OfdmConfig::default(),
            rotation_modulus: 2,
            cfo_precision_hz: 5e3,
            room: RoomConfig::default(),
            speed_mps: 0.1,
            duration_s: 30.0,
            kappa: 1000.0,
            delta_rho_s: 1e-9,
            frame_duration_s: 100e-6,
            sifs_s: 16e-6,
            schedule: ScheduleConfig::default(),
            oscillator: OscillatorConfig::default(),
            snr_db: 30.0,
            tau_min_s: -300e-9,
            tau_max_s: -100e-9,
            timestamp_quantum_s: 1e-11,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.ofdm.validate()?;
        let bad = |msg: String| Err(ScenarioError::Config(msg));
        let positive = [
            ("duration_s", self.duration_s),
            ("frame_duration_s", self.frame_duration_s),
            ("sifs_s", self.sifs_s),
            ("cfo_precision_hz", self.cfo_precision_hz),
            ("timestamp_quantum_s", self.timestamp_quantum_s),
            ("room.width_m", self.room.width_m),
            ("room.height_m", self.room.height_m),
            ("schedule.group_period_s", self.schedule.group_period_s),
            ("schedule.inner_spacing_s", self.schedule.inner_spacing_s),
            ("schedule.outer_spacing_s", self.schedule.outer_spacing_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.rotation_modulus == 0 {
            return bad("rotation_modulus must be ≥ 1".into());
        }
        if !(self.kappa >= 0.0) {
            return bad(format!("kappa must be ≥ 0, got {}", self.kappa));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return bad(format!("snr_db must be finite or +inf, got {}", self.snr_db));
        }
        if !(self.speed_mps >= 0.0 && self.speed_mps.is_finite()) {
            return bad(format!("speed_mps must be ≥ 0, got {}", self.speed_mps));
        }
        if !(self.delta_rho_s >= 0.0 && self.delta_rho_s.is_finite()) {
            return bad(format!("delta_rho_s must be ≥ 0, got {}", self.delta_rho_s));
        }
        if !(self.tau_min_s <= self.tau_max_s) || !self.tau_min_s.is_finite() || !self.tau_max_s.is_finite() {
            return bad(format!("tau range [{}, {}] is empty", self.tau_min_s, self.tau_max_s));
        }
        if !(self.schedule.jitter_s >= 0.0) {
            return bad("schedule.jitter_s must be ≥ 0".into());
        }
        if self.schedule.inner_count == 0 || self.schedule.inner_count > self.schedule.group_size {
            return bad("schedule.inner_count must lie in 1..=group_size".into());
        }
        let osc = &self.oscillator;
        if osc.mean.abs() + osc.amplitude.abs() > crate::waveform::MAX_CRYSTAL_OFFSET {
            return bad("oscillator offset can exceed the crystal bound".into());
        }
        if !self.room.contains(&self.room.sta1()) {
            return bad("STA 1 lies outside the room".into());
        }
        Ok(())
    }
}

/// What the receiver side retains per frame.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Csi { fwd: CsiVector, bwd: CsiVector },
    Phases { psi2_rad: f64, psi4_rad: f64 },
}

/// One frame exchange as seen by the stations.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    /// 1-based exchange index.
    pub p: usize,
    pub t1_s: f64,
    pub t2_s: f64,
    pub t3_s: f64,
    pub t4_s: f64,
    pub coarse_cfo_hz: f64,
    pub observation: Observation,
}

/// Ground truth for one exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeTruth {
    pub p: usize,
    /// Exact (unquantized) request transmit time.
    pub t1_s: f64,
    /// Exact response arrival time at STA 1.
    pub t4_s: f64,
    pub rho_s: f64,
    pub range_m: f64,
    /// `A_p − A_{p−1}`; absent for the first exchange.
    pub diff_range_m: Option<f64>,
    pub draw: ImpairmentDraw,
    pub path_delays_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochTruth {
    pub sta2_clock_offset_s: f64,
    pub oscillator_phase_rad: f64,
    pub exchanges: Vec<ExchangeTruth>,
}

impl EpochTruth {
    pub fn len(&self) -> usize {
        self.exchanges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exchanges.is_empty()
    }
}

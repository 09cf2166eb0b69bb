//! Per-frame CSI synthesis.
//!
//! The forward (CP Request, measured at STA 2) and backward (CP Response,
//! measured at STA 1) CSI follow the closed forms
//!
//! ```text
//! h2_k = e^{j2π k τ2/Ts} e^{j2π n2/N} e^{-jφ} e^{-j2π fc (1+η) ρ}
//! h4_k = e^{j2π k τ4/Ts} e^{j2π n4/N} e^{+jφ} e^{-j2π fc (1+η)(ρ+Δρ)} e^{j2π η fc (t4-t1)}
//! ```
//!
//! Multipath extends these per path: each path contributes its own carrier
//! term and a baseband delay referenced to the LoS arrival, since symbol
//! timing locks onto the first path.
//!
//! All subcarriers carry unit pilots, so CSI equals the demodulated symbol.

mod demod;

pub use demod::{
    demodulate_numeric, max_phase_deviation, oracle_grid, OracleCase, ORACLE_ETAS, ORACLE_STEPS, ORACLE_SYMBOLS, ORACLE_TAUS_S,
};

use std::f64::consts::TAU;
use std::ops::RangeInclusive;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Crystal offsets above this magnitude are outside the modelled hardware.
pub const MAX_CRYSTAL_OFFSET: f64 = 2.0e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveformError {
    #[error("invalid OFDM configuration: {0}")]
    Config(String),
    #[error("invalid impairment draw: {0}")]
    Impairment(String),
    #[error("propagation delay must be positive, got {0} s")]
    NonPositiveDelay(f64),
    #[error("response timestamp t4={t4} s must follow t1={t1} s")]
    Ordering { t1: f64, t4: f64 },
    #[error("invalid path set: {0}")]
    Paths(String),
    #[error("quadrature needs at least {min} steps, got {got}")]
    Resolution { min: usize, got: usize },
    #[error("demodulation window leaves the transmitted symbol (local time {start:e}..{end:e} s)")]
    WindowOutsideSymbol { start: f64, end: f64 },
}

/// OFDM numerology shared by both stations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OfdmConfig {
    pub fc_hz: f64,
    pub num_subcarriers: usize,
    pub ts_s: f64,
    pub tcy_s: f64,
}

impl Default for OfdmConfig {
    /// 20 MHz 802.11ax channel 40: 256 subcarriers, 12.8 µs symbols, 3.2 µs CP.
    fn default() -> Self {
        Self {
            fc_hz: 5.2e9,
            num_subcarriers: 256,
            ts_s: 12.8e-6,
            tcy_s: 3.2e-6,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<(), WaveformError> {
        if self.num_subcarriers < 2 {
            return Err(WaveformError::Config(format!(
                "need at least 2 subcarriers, got {}",
                self.num_subcarriers
            )));
        }
        if !(self.ts_s > 0.0 && self.ts_s.is_finite()) {
            return Err(WaveformError::Config(format!("symbol duration {} s", self.ts_s)));
        }
        if !(self.tcy_s >= 0.0 && self.tcy_s.is_finite()) {
            return Err(WaveformError::Config(format!("cyclic prefix {} s", self.tcy_s)));
        }
        if !(self.fc_hz > 0.0 && self.fc_hz.is_finite()) {
            return Err(WaveformError::Config(format!("carrier {} Hz", self.fc_hz)));
        }
        Ok(())
    }

    /// Lowest subcarrier index, `⌊(−K+1)/2⌋`.
    pub fn k_min(&self) -> i64 {
        (1 - self.num_subcarriers as i64).div_euclid(2)
    }

    /// Highest subcarrier index, `⌊(K−1)/2⌋`.
    pub fn k_max(&self) -> i64 {
        (self.num_subcarriers as i64 - 1).div_euclid(2)
    }

    pub fn subcarriers(&self) -> RangeInclusive<i64> {
        self.k_min()..=self.k_max()
    }
}

/// Per-exchange hardware impairments.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImpairmentDraw {
    /// STA 2 crystal offset η (dimensionless).
    pub eta: f64,
    /// Symbol-start detection error at STA 2 (s).
    pub tau2_s: f64,
    /// Symbol-start detection error at STA 1 (s).
    pub tau4_s: f64,
    /// Random rotation index at STA 2, in `[0, N)`.
    pub n2: u32,
    /// Random rotation index at STA 1, in `[0, N)`.
    pub n4: u32,
    /// Carrier phase offset of STA 2 relative to STA 1 at `t1` (rad).
    pub phi_rad: f64,
    /// Extra uplink propagation delay (s).
    pub delta_rho_s: f64,
}

impl ImpairmentDraw {
    pub fn validate(&self, rotation_modulus: u32) -> Result<(), WaveformError> {
        if rotation_modulus == 0 {
            return Err(WaveformError::Impairment("rotation modulus N must be ≥ 1".into()));
        }
        if !(self.eta.abs() <= MAX_CRYSTAL_OFFSET) {
            return Err(WaveformError::Impairment(format!(
                "|eta| = {:e} exceeds {:e}",
                self.eta.abs(),
                MAX_CRYSTAL_OFFSET
            )));
        }
        if self.n2 >= rotation_modulus || self.n4 >= rotation_modulus {
            return Err(WaveformError::Impairment(format!(
                "rotation indices ({}, {}) must lie in [0, {rotation_modulus})",
                self.n2, self.n4
            )));
        }
        let finite = [self.tau2_s, self.tau4_s, self.phi_rad, self.delta_rho_s];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(WaveformError::Impairment("non-finite timing or phase".into()));
        }
        Ok(())
    }
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub delay_s: f64,
    pub gain: Complex64,
}

/// Multipath profile; the first entry is the LoS path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    paths: Vec<Path>,
}

impl PathSet {
    const POWER_TOLERANCE: f64 = 1e-9;

    pub fn new(paths: Vec<Path>) -> Result<Self, WaveformError> {
        let Some(los) = paths.first() else {
            return Err(WaveformError::Paths("empty path set".into()));
        };
        if paths.iter().any(|p| !(p.delay_s > 0.0 && p.delay_s.is_finite())) {
            return Err(WaveformError::Paths("path delays must be positive".into()));
        }
        if paths.iter().any(|p| p.delay_s < los.delay_s) {
            return Err(WaveformError::Paths("LoS path must arrive first".into()));
        }
        let power: f64 = paths.iter().map(|p| p.gain.norm_sqr()).sum();
        if (power - 1.0).abs() > Self::POWER_TOLERANCE {
            return Err(WaveformError::Paths(format!("total path power {power} != 1")));
        }
        Ok(Self { paths })
    }

    /// Unit-gain LoS-only channel.
    pub fn line_of_sight(delay_s: f64) -> Result<Self, WaveformError> {
        Self::new(vec![Path {
            delay_s,
            gain: Complex64::new(1.0, 0.0),
        }])
    }

    pub fn los(&self) -> &Path {
        &self.paths[0]
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Per-subcarrier CSI, ordered by ascending subcarrier index.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiVector {
    values: Vec<Complex64>,
}

impl CsiVector {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Mean per-entry power.
    pub fn mean_power(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.values.len() as f64
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }
}

/// Which frame of the exchange the CSI belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// CP Request, STA 1 → STA 2.
    Forward,
    /// CP Response, STA 2 → STA 1.
    Backward,
}

/// `e^{j 2π cycles}` with the integer part of `cycles` removed first.
#[inline]
pub(crate) fn cis_cycles(cycles: f64) -> Complex64 {
    Complex64::from_polar(1.0, TAU * (cycles - cycles.round()))
}

/// Closed-form CSI for the CP Request frame (single LoS path).
pub fn synth_request_csi(
    imp: &ImpairmentDraw,
    rho_s: f64,
    cfg: &OfdmConfig,
    rotation_modulus: u32,
) -> Result<CsiVector, WaveformError> {
    if !(rho_s > 0.0) {
        return Err(WaveformError::NonPositiveDelay(rho_s));
    }
    let paths = PathSet::line_of_sight(rho_s)?;
    synth_multipath_csi(Direction::Forward, imp, &paths, 0.0, 1.0, cfg, rotation_modulus)
}

/// Closed-form CSI for the CP Response frame (single LoS path).
pub fn synth_response_csi(
    imp: &ImpairmentDraw,
    rho_s: f64,
    t1_s: f64,
    t4_s: f64,
    cfg: &OfdmConfig,
    rotation_modulus: u32,
) -> Result<CsiVector, WaveformError> {
    if !(rho_s > 0.0) {
        return Err(WaveformError::NonPositiveDelay(rho_s));
    }
    let paths = PathSet::line_of_sight(rho_s)?;
    synth_multipath_csi(Direction::Backward, imp, &paths, t1_s, t4_s, cfg, rotation_modulus)
}

/// CSI over a multipath channel.
///
/// `t1_s`/`t4_s` only enter the backward CSI (CFO rotation over the
/// exchange); for the forward direction they are ignored.
pub fn synth_multipath_csi(
    direction: Direction,
    imp: &ImpairmentDraw,
    paths: &PathSet,
    t1_s: f64,
    t4_s: f64,
    cfg: &OfdmConfig,
    rotation_modulus: u32,
) -> Result<CsiVector, WaveformError> {
    cfg.validate()?;
    imp.validate(rotation_modulus)?;
    if direction == Direction::Backward && !(t4_s > t1_s) {
        return Err(WaveformError::Ordering { t1: t1_s, t4: t4_s });
    }
    let n = rotation_modulus as f64;
    let fc = cfg.fc_hz;
    let eta = imp.eta;
    let los = paths.los().delay_s;

    // Common (k- and path-independent) factor, in cycles.
    let (tau, common_cycles, extra_delay) = match direction {
        Direction::Forward => (imp.tau2_s, imp.n2 as f64 / n - imp.phi_rad / TAU, 0.0),
        Direction::Backward => (
            imp.tau4_s,
            imp.n4 as f64 / n + imp.phi_rad / TAU + eta * fc * (t4_s - t1_s),
            imp.delta_rho_s,
        ),
    };
    let common = cis_cycles(common_cycles);

    // Per-path carrier term and baseband delay referenced to the LoS arrival.
    let per_path: Vec<(Complex64, f64)> = paths
        .paths()
        .iter()
        .map(|p| {
            let carrier = cis_cycles(-fc * (1.0 + eta) * (p.delay_s + extra_delay));
            (p.gain * carrier * common, tau - (p.delay_s - los))
        })
        .collect();

    let values = cfg
        .subcarriers()
        .map(|k| {
            per_path
                .iter()
                .map(|&(weight, delay)| weight * cis_cycles(k as f64 * delay / cfg.ts_s))
                .sum()
        })
        .collect();
    Ok(CsiVector::new(values))
}

/// Adds circularly-symmetric complex Gaussian noise at the given per-entry
/// SNR (dB, relative to the vector's mean power). `+∞` returns the input.
pub fn apply_noise<R: Rng + ?Sized>(csi: &CsiVector, snr_db: f64, rng: &mut R) -> CsiVector {
    assert!(!snr_db.is_nan(), "SNR must not be NaN");
    if snr_db == f64::INFINITY {
        return csi.clone();
    }
    let noise_power = csi.mean_power() / 10f64.powf(snr_db / 10.0);
    let sigma = (noise_power / 2.0).sqrt();
    let values = csi
        .values()
        .iter()
        .map(|v| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            v + Complex64::new(re * sigma, im * sigma)
        })
        .collect();
    CsiVector::new(values)
}

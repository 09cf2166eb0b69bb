//! Numerical OFDM demodulation used as an oracle for the closed-form CSI.
//!
//! The received symbol is written out as a sum of subcarrier exponentials
//! and the FFT is replaced by a composite trapezoid integral over the
//! receiver's symbol window, in the receiver's local time `u`. Carrier
//! terms are constant across the window once CFO compensation with the true
//! `η fc` is assumed, so they are pulled out of the integral exactly.
//!
//! Forward (STA 2 receives, its clock runs `1+η` fast):
//!
//! ```text
//! y_k = C2 (1+η)/Ts ∫_0^{Ts/(1+η)} Σ_k̄ e^{j2π k̄ (u + τ2 − mη(Ts+Tcy)/(1+η))/Ts} e^{−j2π k (1+η) u/Ts} du
//! C2  = e^{j2π n2/N} e^{−jφ} e^{−j2π fc ρ} e^{−j2π η fc (ρ+τ2)}
//! ```
//!
//! Backward (STA 1 receives a symbol generated on STA 2's clock):
//!
//! ```text
//! y_k = C4 /Ts ∫_0^{Ts} Σ_k̄ e^{j2π k̄ ((1+η)(u + τ4) + mη(Ts+Tcy))/Ts} e^{−j2π k u/Ts} du
//! C4  = e^{j2π n4/N} e^{+jφ} e^{−j2π fc (1+η)(ρ+Δρ)} e^{j2π η fc (t4−t1)}
//! ```
//!
//! The closed forms drop the `η fc τ2` carrier term, the in-window phase
//! drift and the symbol-index timing drift; all three vanish at `η = 0`.

use std::f64::consts::TAU;

use num_complex::Complex64;

use super::{cis_cycles, synth_request_csi, synth_response_csi, CsiVector, Direction, ImpairmentDraw, OfdmConfig, WaveformError};

pub const ORACLE_ETAS: [f64; 3] = [0.0, 1e-5, 2e-5];
pub const ORACLE_TAUS_S: [f64; 2] = [-300e-9, -100e-9];
pub const ORACLE_SYMBOLS: [u32; 2] = [0, 4];
/// Quadrature steps used by [`oracle_grid`].
pub const ORACLE_STEPS: usize = 16384;

/// Demodulates OFDM symbol `m` of the given frame by direct quadrature.
///
/// `quadrature_steps` must be at least `10 K`. The rule is second order, so
/// about `32 K` steps are needed for 1e-6 relative agreement when `η ≠ 0`.
#[allow(clippy::too_many_arguments)]
pub fn demodulate_numeric(
    direction: Direction,
    imp: &ImpairmentDraw,
    rho_s: f64,
    t1_s: f64,
    t4_s: f64,
    symbol_index: u32,
    cfg: &OfdmConfig,
    rotation_modulus: u32,
    quadrature_steps: usize,
) -> Result<CsiVector, WaveformError> {
    cfg.validate()?;
    imp.validate(rotation_modulus)?;
    let min = 10 * cfg.num_subcarriers;
    if quadrature_steps < min {
        return Err(WaveformError::Resolution { min, got: quadrature_steps });
    }
    if !(rho_s > 0.0) {
        return Err(WaveformError::NonPositiveDelay(rho_s));
    }
    if direction == Direction::Backward && !(t4_s > t1_s) {
        return Err(WaveformError::Ordering { t1: t1_s, t4: t4_s });
    }

    let eta = imp.eta;
    let ts = cfg.ts_s;
    let fc = cfg.fc_hz;
    let n = rotation_modulus as f64;
    let drift = symbol_index as f64 * eta * (ts + cfg.tcy_s);

    // Transmit-time argument t_tx(u) = slope·u + offset; receiver kernel e^{-j2πk·rx_scale·u/Ts}.
    let (span, slope, offset, rx_scale, constant) = match direction {
        Direction::Forward => (
            ts / (1.0 + eta),
            1.0,
            imp.tau2_s - drift / (1.0 + eta),
            1.0 + eta,
            cis_cycles(
                imp.n2 as f64 / n - imp.phi_rad / TAU - fc * rho_s - eta * fc * (rho_s + imp.tau2_s),
            ),
        ),
        Direction::Backward => (
            ts,
            1.0 + eta,
            (1.0 + eta) * imp.tau4_s + drift,
            1.0,
            cis_cycles(
                imp.n4 as f64 / n + imp.phi_rad / TAU
                    - fc * (1.0 + eta) * (rho_s + imp.delta_rho_s)
                    + eta * fc * (t4_s - t1_s),
            ),
        ),
    };

    let start = offset;
    let end = slope * span + offset;
    if start < -cfg.tcy_s || end >= ts {
        return Err(WaveformError::WindowOutsideSymbol { start, end });
    }

    let h = span / quadrature_steps as f64;
    let ks: Vec<f64> = cfg.subcarriers().map(|k| k as f64).collect();

    // Received baseband signal at every node.
    let received: Vec<Complex64> = (0..=quadrature_steps)
        .map(|i| {
            let t_tx = slope * (i as f64 * h) + offset;
            ks.iter().map(|&kb| cis_cycles(kb * t_tx / ts)).sum()
        })
        .collect();

    let values = ks
        .iter()
        .map(|&k| {
            // e^{-j2πk rx_scale u/Ts}, advanced by a fixed rotation and
            // re-anchored periodically to keep rounding error small.
            let step = cis_cycles(-k * rx_scale * h / ts);
            let mut acc = Complex64::new(0.0, 0.0);
            let mut kernel = Complex64::new(1.0, 0.0);
            for (i, r) in received.iter().enumerate() {
                if i % 256 == 0 {
                    kernel = cis_cycles(-k * rx_scale * (i as f64 * h) / ts);
                }
                let w = if i == 0 || i == quadrature_steps { 0.5 } else { 1.0 };
                acc += r * kernel * w;
                kernel *= step;
            }
            constant * acc * h / span
        })
        .collect();
    Ok(CsiVector::new(values))
}

/// Largest per-subcarrier phase gap between two CSI vectors.
pub fn max_phase_deviation(a: &CsiVector, b: &CsiVector) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x * y.conj()).arg().abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCase {
    pub direction: Direction,
    pub eta: f64,
    pub tau_s: f64,
    pub symbol_index: u32,
    pub max_phase_dev_rad: f64,
}

/// Closed form against quadrature over every `(η, τ, m)` of the grid, both
/// directions. Both symbol delays equal `τ`; the remaining draw is fixed.
pub fn oracle_grid(cfg: &OfdmConfig, quadrature_steps: usize) -> Result<Vec<OracleCase>, WaveformError> {
    let (rho, t1, t4, n) = (3.3357e-9, 0.0, 116e-6, 2);
    let mut cases = Vec::new();
    for eta in ORACLE_ETAS {
        for tau_s in ORACLE_TAUS_S {
            let imp = ImpairmentDraw { eta, tau2_s: tau_s, tau4_s: tau_s, n2: 1, n4: 0, phi_rad: 0.7, delta_rho_s: 1e-9 };
            let closed_fwd = synth_request_csi(&imp, rho, cfg, n)?;
            let closed_bwd = synth_response_csi(&imp, rho, t1, t4, cfg, n)?;
            for symbol_index in ORACLE_SYMBOLS {
                for (direction, closed) in [(Direction::Forward, &closed_fwd), (Direction::Backward, &closed_bwd)] {
                    let num = demodulate_numeric(direction, &imp, rho, t1, t4, symbol_index, cfg, n, quadrature_steps)?;
                    cases.push(OracleCase {
                        direction,
                        eta,
                        tau_s,
                        symbol_index,
                        max_phase_dev_rad: max_phase_deviation(&closed, &num),
                    });
                }
            }
        }
    }
    Ok(cases)
}

//! End-to-end epoch generation.
//!
//! Randomness is split into independent ChaCha streams (schedule, motion,
//! impairments, CFO, noise) so that sweeping one parameter keeps every other
//! draw of a given seed unchanged.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    oscillator_offset, realize_channel, schedule_exchanges, waypoint_trajectory, EpochTruth, ExchangeTruth,
    MeasurementRecord, Observation, ScenarioConfig, ScenarioError,
};
use crate::phase::wrap;
use crate::waveform::{apply_noise, synth_multipath_csi, Direction, ImpairmentDraw};
use crate::SPEED_OF_LIGHT;

const STREAM_EPOCH: u64 = 0;
const STREAM_SCHEDULE: u64 = 1;
const STREAM_MOTION: u64 = 2;
const STREAM_IMPAIRMENT: u64 = 3;
const STREAM_CFO: u64 = 4;
const STREAM_NOISE: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn quantize(t: f64, q: f64) -> f64 {
    (t / q).round() * q
}

/// Simulates one epoch, drawing its seed from `rng`.
pub fn simulate_epoch<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<(Vec<MeasurementRecord>, EpochTruth), ScenarioError> {
    simulate_epoch_seeded(cfg, rng.random())
}

/// Simulates one epoch deterministically from `seed`.
pub fn simulate_epoch_seeded(
    cfg: &ScenarioConfig,
    seed: u64,
) -> Result<(Vec<MeasurementRecord>, EpochTruth), ScenarioError> {
    cfg.validate()?;
    let fc = cfg.ofdm.fc_hz;
    let n = cfg.rotation_modulus;

    let mut epoch_rng = stream(seed, STREAM_EPOCH);
    let clock_offset: f64 = epoch_rng.random_range(0.0..=1.0);
    let phi_1: f64 = epoch_rng.random_range(0.0..TAU);
    let drawn_osc_phase: f64 = epoch_rng.random_range(0.0..TAU);
    let osc_phase = cfg.oscillator.phase_rad.unwrap_or(drawn_osc_phase);

    let t1 = schedule_exchanges(cfg, &mut stream(seed, STREAM_SCHEDULE))?;
    let track = waypoint_trajectory(cfg, &mut stream(seed, STREAM_MOTION));
    let mut imp_rng = stream(seed, STREAM_IMPAIRMENT);
    let mut cfo_rng = stream(seed, STREAM_CFO);
    let mut noise_rng = stream(seed, STREAM_NOISE);

    let q = cfg.timestamp_quantum_s;
    let turnaround = 2.0 * cfg.frame_duration_s + cfg.sifs_s;
    let f = cfg.cfo_precision_hz;

    let mut records = Vec::with_capacity(t1.len());
    let mut truth = Vec::with_capacity(t1.len());
    // STA 2 clock reading at t1, and the carrier phase offset φ.
    let mut drift_integral = 0.0;
    let mut phi = phi_1;
    let mut prev: Option<(f64, f64, f64)> = None; // (t1, eta, range)

    for (i, &t1_p) in t1.iter().enumerate() {
        let eta = oscillator_offset(t1_p, &cfg.oscillator, osc_phase);
        match prev {
            None => drift_integral = eta * t1_p,
            Some((t_prev, eta_prev, _)) => {
                let dt = t1_p - t_prev;
                drift_integral += 0.5 * (eta + eta_prev) * dt;
                phi = wrap(phi + PI * (eta + eta_prev) * fc * dt);
            }
        }

        let sta2 = track.position(t1_p);
        let paths = realize_channel(sta2, cfg)?;
        let rho = paths.los().delay_s;

        let draw = ImpairmentDraw {
            eta,
            tau2_s: imp_rng.random_range(cfg.tau_min_s..=cfg.tau_max_s),
            tau4_s: imp_rng.random_range(cfg.tau_min_s..=cfg.tau_max_s),
            n2: imp_rng.random_range(0..n),
            n4: imp_rng.random_range(0..n),
            phi_rad: phi,
            delta_rho_s: cfg.delta_rho_s,
        };

        let c2_at_t1 = clock_offset + t1_p + drift_integral;
        let t2 = c2_at_t1 + (1.0 + eta) * (rho + draw.tau2_s);
        let t3 = t2 + turnaround;
        let t4 = t1_p + rho + draw.tau2_s + turnaround / (1.0 + eta) + rho + draw.delta_rho_s + draw.tau4_s;

        let fwd = synth_multipath_csi(Direction::Forward, &draw, &paths, t1_p, t4, &cfg.ofdm, n)?;
        let bwd = synth_multipath_csi(Direction::Backward, &draw, &paths, t1_p, t4, &cfg.ofdm, n)?;
        let fwd = apply_noise(&fwd, cfg.snr_db, &mut noise_rng);
        let bwd = apply_noise(&bwd, cfg.snr_db, &mut noise_rng);

        let coarse_cfo = eta * fc + cfo_rng.random_range(-f..=f);
        let range = SPEED_OF_LIGHT * rho;

        records.push(MeasurementRecord {
            p: i + 1,
            t1_s: quantize(t1_p, q),
            t2_s: quantize(t2, q),
            t3_s: quantize(t3, q),
            t4_s: quantize(t4, q),
            coarse_cfo_hz: coarse_cfo,
            observation: Observation::Csi { fwd, bwd },
        });
        truth.push(ExchangeTruth {
            p: i + 1,
            t1_s: t1_p,
            t4_s: t4,
            rho_s: rho,
            range_m: range,
            diff_range_m: prev.map(|(_, _, a)| range - a),
            draw,
            path_delays_s: paths.paths().iter().map(|p| p.delay_s).collect(),
        });
        prev = Some((t1_p, eta, range));
    }

    Ok((
        records,
        EpochTruth {
            sta2_clock_offset_s: clock_offset,
            oscillator_phase_rad: osc_phase,
            exchanges: truth,
        },
    ))
}

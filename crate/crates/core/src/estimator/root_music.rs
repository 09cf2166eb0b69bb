//! Root-MUSIC symbol-delay estimation over the subcarrier axis.
//!
//! CSI on subcarrier `k` of a path with delay `τ` rotates as `w^k` with
//! `w = e^{j2πτ/Ts}`, so the subcarrier axis plays the role of a uniform
//! linear array. The covariance is spatially smoothed over length-`L`
//! subvectors (`L = ⌊2K/3⌋`) and forward–backward averaged.
//!
//! The signal subspace is found by block orthogonal iteration with
//! Rayleigh–Ritz steps instead of a full eigendecomposition, and the
//! noise-subspace polynomial is rooted locally: the unit-circle spectrum is
//! evaluated with an FFT, its deepest minima seed Newton iterations, and
//! roots already found are deflated implicitly. Only roots near the unit
//! circle matter for the delay estimate, and those are exactly the ones
//! the spectrum minima locate.

use std::cell::RefCell;
use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::EstimatorError;
use crate::waveform::{CsiVector, OfdmConfig};

/// Roots farther than this from the unit circle are not delay candidates.
pub const ROOT_BAND: f64 = 0.25;

const MAX_SUBSPACE_ITERS: usize = 6;
const SUBSPACE_TOL: f64 = 1e-9;
const MIN_SPECTRUM_POINTS: usize = 4096;
const NEWTON_ITERS: usize = 80;

/// A root of the noise-subspace polynomial, folded inside the unit circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootCandidate {
    pub root: Complex64,
    pub delay_s: f64,
    /// Least-squares amplitude of the corresponding path.
    pub amplitude: f64,
}

impl RootCandidate {
    pub fn distance_to_circle(&self) -> f64 {
        (1.0 - self.root.norm()).abs()
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn inverse_fft(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Smoothed forward–backward covariance, row-major `L × L`.
pub(crate) fn smoothed_covariance(x: &[Complex64], l: usize) -> Vec<Complex64> {
    let k = x.len();
    let m = k - l + 1;
    let scale = 1.0 / m as f64;
    let mut r = vec![Complex64::new(0.0, 0.0); l * l];
    // first row and column directly, then R[i+1][j+1] = R[i][j] + new − old
    for j in 0..l {
        let s: Complex64 = (0..m).map(|t| x[t] * x[t + j].conj()).sum();
        r[j] = s * scale;
        r[j * l] = r[j].conj();
    }
    for i in 0..l - 1 {
        for j in 0..l - 1 {
            let upd = x[i + m] * x[j + m].conj() - x[i] * x[j].conj();
            r[(i + 1) * l + j + 1] = r[i * l + j] + upd * scale;
        }
    }
    let mut fb = vec![Complex64::new(0.0, 0.0); l * l];
    for i in 0..l {
        for j in 0..l {
            fb[i * l + j] = 0.5 * (r[i * l + j] + r[(l - 1 - i) * l + (l - 1 - j)].conj());
        }
    }
    fb
}

fn mat_vec(r: &[Complex64], l: usize, v: &[Complex64]) -> Vec<Complex64> {
    (0..l)
        .map(|i| {
            let row = &r[i * l..(i + 1) * l];
            row.iter().zip(v).map(|(a, b)| a * b).sum()
        })
        .collect()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Modified Gram–Schmidt. A column that collapses is replaced by the next
/// unit basis vector that survives orthogonalization.
fn orthonormalize(cols: &mut [Vec<Complex64>]) {
    let l = cols[0].len();
    let scale = cols.iter().map(|c| norm(c)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut next_basis = 0usize;
    for j in 0..cols.len() {
        let mut attempts = 0;
        loop {
            for i in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let proj = dot(&done[i], &rest[0]);
                for (v, q) in rest[0].iter_mut().zip(&done[i]) {
                    *v -= proj * q;
                }
            }
            let n = norm(&cols[j]);
            let threshold = if attempts == 0 { 1e-10 * scale } else { 1e-8 };
            if n > threshold {
                cols[j].iter_mut().for_each(|v| *v /= n);
                break;
            }
            // deterministic fallback: spread basis vectors across the array
            let idx = (next_basis * 7919 + j) % l;
            next_basis += 1;
            attempts += 1;
            cols[j] = vec![Complex64::new(0.0, 0.0); l];
            cols[j][idx] = Complex64::new(1.0, 0.0);
            assert!(attempts <= l + 1, "cannot complete an orthonormal basis");
        }
    }
}

/// Dominant `d`-dimensional eigenspace of a Hermitian `L × L` matrix.
pub(crate) fn signal_subspace(r: &[Complex64], l: usize, x: &[Complex64], d: usize) -> Vec<Vec<Complex64>> {
    let m = x.len() - l + 1;
    let mut q: Vec<Vec<Complex64>> = (0..d)
        .map(|s| {
            let start = if d > 1 { s * (m - 1) / (d - 1) } else { 0 };
            x[start..start + l].to_vec()
        })
        .collect();
    orthonormalize(&mut q);
    let mut ritz = q.clone();
    for _ in 0..MAX_SUBSPACE_ITERS {
        let w: Vec<Vec<Complex64>> = q.iter().map(|v| mat_vec(r, l, v)).collect();
        let h = DMatrix::from_fn(d, d, |a, b| {
            0.5 * (dot(&q[a], &w[b]) + dot(&q[b], &w[a]).conj())
        });
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let combine = |basis: &[Vec<Complex64>], col: usize| -> Vec<Complex64> {
            (0..l).map(|i| (0..d).map(|a| basis[a][i] * eig.eigenvectors[(a, col)]).sum()).collect()
        };
        ritz = order.iter().map(|&c| combine(&q, c)).collect();
        let rw: Vec<Vec<Complex64>> = order.iter().map(|&c| combine(&w, c)).collect();
        let lead = eig.eigenvalues[order[0]].abs().max(f64::MIN_POSITIVE);
        let converged = order.iter().enumerate().all(|(s, &c)| {
            let lambda = eig.eigenvalues[c];
            let res: f64 = rw[s].iter().zip(&ritz[s]).map(|(a, b)| (a - b * lambda).norm_sqr()).sum();
            res.sqrt() <= SUBSPACE_TOL * lead
        });
        if converged {
            break;
        }
        q = rw;
        orthonormalize(&mut q);
    }
    ritz
}

/// Coefficients `c_n`, `n = 0..=2L−2`, of `z^{L−1} a(z)^H (I − V Vᴴ) a(z)`.
pub(crate) fn noise_polynomial(v: &[Vec<Complex64>], l: usize) -> Vec<Complex64> {
    // b_l = L δ_l − Σ_s Σ_i v_s[i] conj(v_s[i+l]),  b_{−l} = conj(b_l)
    let mut b = vec![Complex64::new(0.0, 0.0); l];
    b[0] = Complex64::new(l as f64, 0.0);
    for vs in v {
        for (lag, bl) in b.iter_mut().enumerate() {
            let s: Complex64 = (0..l - lag).map(|i| vs[i] * vs[i + lag].conj()).sum();
            *bl -= s;
        }
    }
    b[0] = Complex64::new(b[0].re, 0.0);
    let mut c = vec![Complex64::new(0.0, 0.0); 2 * l - 1];
    for lag in 0..l {
        c[l - 1 + lag] = b[lag];
        c[l - 1 - lag] = b[lag].conj();
    }
    c
}

/// `(P(z), P'(z))` by Horner's rule; `coeffs[n]` multiplies `z^n`.
fn horner(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Newton iteration with implicit deflation of `found` and a step that
/// adapts to double roots (the on-circle roots of a noiseless spectrum).
fn polish(coeffs: &[Complex64], start: Complex64, found: &[Complex64]) -> Complex64 {
    let mut z = start;
    for _ in 0..NEWTON_ITERS {
        let (p, dp) = horner(coeffs, z);
        if p == Complex64::new(0.0, 0.0) {
            break;
        }
        let defl: Complex64 = found
            .iter()
            .filter(|r| (z - *r).norm() > 1e-12)
            .map(|r| 1.0 / (z - r))
            .sum();
        let denom = dp / p - defl;
        if denom.norm() == 0.0 || !denom.is_finite() {
            break;
        }
        let step = 1.0 / denom;
        let single = z - step;
        let double = z - 2.0 * step;
        let z_next = if horner(coeffs, double).0.norm() < horner(coeffs, single).0.norm() {
            double
        } else {
            single
        };
        let moved = (z_next - z).norm();
        z = z_next;
        if moved <= 1e-14 * z.norm().max(1.0) {
            break;
        }
    }
    z
}

/// Candidate roots near the unit circle, nearest first, with their delays
/// and least-squares amplitudes.
pub fn root_music_candidates(
    csi: &CsiVector,
    signal_dim: usize,
    cfg: &OfdmConfig,
) -> Result<Vec<RootCandidate>, EstimatorError> {
    let k = csi.len();
    if signal_dim == 0 {
        return Err(EstimatorError::InvalidInput("signal dimension must be ≥ 1".into()));
    }
    if k != cfg.num_subcarriers {
        return Err(EstimatorError::InvalidInput(format!(
            "CSI has {k} entries, configuration expects {}",
            cfg.num_subcarriers
        )));
    }
    if k < 2 * signal_dim + 2 {
        return Err(EstimatorError::InvalidInput(format!(
            "need at least {} subcarriers for signal dimension {signal_dim}, got {k}",
            2 * signal_dim + 2
        )));
    }
    let x = csi.values();
    let l = 2 * k / 3;
    let r = smoothed_covariance(x, l);
    let trace: f64 = (0..l).map(|i| r[i * l + i].re).sum();
    if !trace.is_finite() || trace <= 1e-300 {
        return Err(EstimatorError::Degenerate(format!("covariance trace {trace}")));
    }
    let v = signal_subspace(&r, l, x, signal_dim);
    let coeffs = noise_polynomial(&v, l);

    // Unit-circle spectrum D(θ) = b_0 + 2 Re Σ_{l≥1} b_l e^{jlθ}.
    let g = MIN_SPECTRUM_POINTS.max((4 * l).next_power_of_two());
    let mut buf = vec![Complex64::new(0.0, 0.0); g];
    buf[..l].copy_from_slice(&coeffs[l - 1..]);
    inverse_fft(g).process(&mut buf);
    let b0 = coeffs[l - 1].re;
    let spectrum: Vec<f64> = buf.iter().map(|v| 2.0 * v.re - b0).collect();
    let mut minima: Vec<usize> = (0..g)
        .filter(|&i| {
            let prev = spectrum[(i + g - 1) % g];
            let next = spectrum[(i + 1) % g];
            spectrum[i] < prev && spectrum[i] <= next
        })
        .collect();
    minima.sort_by(|&a, &b| spectrum[a].total_cmp(&spectrum[b]));
    minima.truncate(2 * signal_dim + 2);

    let mut found: Vec<Complex64> = Vec::new();
    for &i in &minima {
        let start = Complex64::from_polar(1.0, TAU * i as f64 / g as f64);
        let z = polish(&coeffs, start, &found);
        if z.is_finite() && z.norm() > 0.0 {
            found.push(z);
        }
    }

    let mut roots: Vec<Complex64> = Vec::new();
    for z in found {
        let inside = if z.norm() > 1.0 { 1.0 / z.conj() } else { z };
        if roots.iter().all(|r| (r - inside).norm() > 1e-6) {
            roots.push(inside);
        }
    }
    roots.retain(|z| (1.0 - z.norm()).abs() <= ROOT_BAND);
    roots.sort_by(|a, b| (1.0 - a.norm()).abs().total_cmp(&(1.0 - b.norm()).abs()));
    roots.truncate(signal_dim);
    if roots.is_empty() {
        return Err(EstimatorError::EstimationFailure(format!(
            "no polynomial root within {ROOT_BAND} of the unit circle"
        )));
    }

    // Least-squares path amplitudes on the candidate delays.
    let ks: Vec<f64> = cfg.subcarriers().map(|k| k as f64).collect();
    let basis = DMatrix::from_fn(k, roots.len(), |row, col| Complex64::from_polar(1.0, roots[col].arg() * ks[row]));
    let rhs = DVector::from_column_slice(x);
    let amps = basis
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| EstimatorError::Degenerate(format!("amplitude fit: {e}")))?;

    Ok(roots
        .iter()
        .zip(amps.iter())
        .map(|(z, a)| RootCandidate {
            root: *z,
            delay_s: z.arg() * cfg.ts_s / TAU,
            amplitude: a.norm(),
        })
        .collect())
}

/// Delay of the most dominant path: among the `signal_dim` roots nearest
/// the unit circle, the one with the largest least-squares amplitude.
pub fn estimate_symbol_delay(csi: &CsiVector, signal_dim: usize, cfg: &OfdmConfig) -> Result<f64, EstimatorError> {
    let cands = root_music_candidates(csi, signal_dim, cfg)?;
    let best = cands
        .iter()
        .max_by(|a, b| a.amplitude.total_cmp(&b.amplitude))
        .expect("candidate list is non-empty");
    Ok(best.delay_s)
}

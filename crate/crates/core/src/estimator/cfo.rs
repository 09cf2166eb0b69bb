//! Windowed CFO refinement from closely spaced exchange pairs.
//!
//! For two exchanges `p−1`, `p` a few hundred µs apart the range and the
//! crystal offset barely change, so
//! `N(ψ4_p − ψ2_p − ψ4_{p−1} + ψ2_{p−1}) ≈ 2πN·CFO·(t4_p + t1_p − t4_{p−1} − t1_{p−1})`
//! modulo 2π. Each window fits one CFO to its qualifying pairs around the
//! mean coarse estimate; exchanges outside every fit are interpolated.

use std::f64::consts::TAU;

use num_complex::Complex64;

use super::{CpPair, EstimatorError};

/// Search parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfoSearch {
    pub rotation_modulus: u32,
    /// Coarse CFO precision `F` (Hz); the search spans `±F`.
    pub precision_hz: f64,
    /// Window length `W` (s).
    pub window_s: f64,
    /// Maximum spacing `Tmax` (s) of a qualifying pair.
    pub t_max_s: f64,
    /// Minimum qualifying pairs per window.
    pub min_pairs: usize,
}

impl Default for CfoSearch {
    fn default() -> Self {
        Self {
            rotation_modulus: 2,
            precision_hz: 5e3,
            window_s: 0.5,
            t_max_s: 1e-3,
            min_pairs: 3,
        }
    }
}

/// One fitted window.
#[derive(Debug, Clone, PartialEq)]
pub struct CfoWindow {
    pub start_s: f64,
    pub end_s: f64,
    /// Positions (0-based, into the input) of the qualifying exchanges.
    pub members: Vec<usize>,
    pub mean_coarse_hz: f64,
    /// Fitted offset from the mean coarse CFO; `None` if skipped.
    pub f_opt_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfoTrack {
    /// Refined CFO per input exchange (Hz).
    pub f_hat_hz: Vec<f64>,
    /// Whether the exchange belongs to a fitted window.
    pub fitted: Vec<bool>,
    pub windows: Vec<CfoWindow>,
    /// No window could be fitted; the coarse CFO was passed through.
    pub passthrough: bool,
}

/// Unit phasor and time step of one qualifying pair.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PairTerm {
    pub phasor: Complex64,
    pub interval_s: f64,
}

/// `Re Σ phasor·e^{−j2πN(f + base)·interval}`.
pub(crate) fn objective(terms: &[PairTerm], n: f64, base_hz: f64, f_hz: f64) -> f64 {
    terms
        .iter()
        .map(|t| (t.phasor * Complex64::from_polar(1.0, -TAU * n * (f_hz + base_hz) * t.interval_s)).re)
        .sum()
}

/// Grid step keeping the objective's phase resolution below 0.02 rad.
pub(crate) fn grid_step(terms: &[PairTerm], n: f64) -> f64 {
    let max_interval = terms.iter().map(|t| t.interval_s.abs()).fold(0.0, f64::max);
    if max_interval > 0.0 {
        (0.02 / (TAU * n * max_interval)).min(1.0)
    } else {
        1.0
    }
}

/// Arg-max of the objective over `[−F, F]`: uniform grid, then golden
/// section inside the neighbouring grid cells.
pub(crate) fn argmax_cfo(terms: &[PairTerm], n: f64, base_hz: f64, f_bound: f64, step: f64) -> f64 {
    let count = (2.0 * f_bound / step).ceil() as usize;
    let step = 2.0 * f_bound / count as f64;
    // Evaluate the grid with one complex rotation per term and point.
    let mut current: Vec<Complex64> = terms
        .iter()
        .map(|t| t.phasor * Complex64::from_polar(1.0, -TAU * n * (base_hz - f_bound) * t.interval_s))
        .collect();
    let rot: Vec<Complex64> = terms
        .iter()
        .map(|t| Complex64::from_polar(1.0, -TAU * n * step * t.interval_s))
        .collect();
    let (mut best_i, mut best_v) = (0usize, f64::NEG_INFINITY);
    for i in 0..=count {
        if i % 512 == 0 {
            let f = -f_bound + i as f64 * step;
            for (c, t) in current.iter_mut().zip(terms) {
                *c = t.phasor * Complex64::from_polar(1.0, -TAU * n * (f + base_hz) * t.interval_s);
            }
        }
        let v: f64 = current.iter().map(|c| c.re).sum();
        if v > best_v {
            best_v = v;
            best_i = i;
        }
        for (c, r) in current.iter_mut().zip(&rot) {
            *c *= r;
        }
    }
    let centre = -f_bound + best_i as f64 * step;
    let lo = (centre - step).max(-f_bound);
    let hi = (centre + step).min(f_bound);
    golden_max(|f| objective(terms, n, base_hz, f), lo, hi, step * 1e-4)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Refines the CFO per exchange. `pairs` must be sorted by `t1`.
pub fn refine_cfo(pairs: &[CpPair], search: &CfoSearch) -> Result<CfoTrack, EstimatorError> {
    if pairs.windows(2).any(|w| !(w[1].t1_s > w[0].t1_s)) {
        return Err(EstimatorError::InvalidInput("exchanges must be strictly increasing in t1".into()));
    }
    if !(search.precision_hz > 0.0 && search.window_s > 0.0 && search.t_max_s > 0.0) {
        return Err(EstimatorError::InvalidInput("CFO search parameters must be positive".into()));
    }
    if search.rotation_modulus == 0 {
        return Err(EstimatorError::InvalidInput("rotation modulus must be ≥ 1".into()));
    }
    let n = search.rotation_modulus as f64;
    let count = pairs.len();
    if count == 0 {
        return Ok(CfoTrack { f_hat_hz: vec![], fitted: vec![], windows: vec![], passthrough: true });
    }

    let t_first = pairs[0].t1_s;
    let span = pairs[count - 1].t1_s - t_first;
    let num_windows = ((span / search.window_s).ceil() as usize).max(1);

    let mut f_hat = vec![f64::NAN; count];
    let mut fitted = vec![false; count];
    let mut windows = Vec::with_capacity(num_windows);
    let mut lo = 0usize;
    for w in 0..num_windows {
        let start = t_first + w as f64 * search.window_s;
        let end = t_first + (w + 1) as f64 * search.window_s;
        while lo < count && pairs[lo].t1_s < start {
            lo += 1;
        }
        let members: Vec<usize> = (lo.max(1)..count)
            .take_while(|&i| pairs[i].t1_s <= end)
            .filter(|&i| (pairs[i].t1_s - pairs[i - 1].t1_s).abs() < search.t_max_s)
            .collect();
        let mean_coarse = if members.is_empty() {
            f64::NAN
        } else {
            members.iter().map(|&i| pairs[i].coarse_cfo_hz).sum::<f64>() / members.len() as f64
        };
        let f_opt = if members.len() >= search.min_pairs {
            let terms: Vec<PairTerm> = members
                .iter()
                .map(|&i| {
                    let (a, b) = (&pairs[i - 1], &pairs[i]);
                    PairTerm {
                        phasor: Complex64::from_polar(
                            1.0,
                            n * (b.psi4_rad - b.psi2_rad - a.psi4_rad + a.psi2_rad),
                        ),
                        interval_s: b.t4_s + b.t1_s - a.t4_s - a.t1_s,
                    }
                })
                .collect();
            let step = grid_step(&terms, n);
            let f = argmax_cfo(&terms, n, mean_coarse, search.precision_hz, step);
            for &i in &members {
                f_hat[i] = f + mean_coarse;
                fitted[i] = true;
            }
            Some(f)
        } else {
            None
        };
        windows.push(CfoWindow { start_s: start, end_s: end, members, mean_coarse_hz: mean_coarse, f_opt_hz: f_opt });
    }

    let anchors: Vec<usize> = (0..count).filter(|&i| fitted[i]).collect();
    if anchors.is_empty() {
        return Ok(CfoTrack {
            f_hat_hz: pairs.iter().map(|p| p.coarse_cfo_hz).collect(),
            fitted,
            windows,
            passthrough: true,
        });
    }
    // Linear interpolation between fitted exchanges, constant beyond them.
    let mut next = 0usize;
    for i in 0..count {
        if fitted[i] {
            continue;
        }
        while next < anchors.len() && anchors[next] < i {
            next += 1;
        }
        f_hat[i] = if next == 0 {
            f_hat[anchors[0]]
        } else if next == anchors.len() {
            f_hat[anchors[anchors.len() - 1]]
        } else {
            let (a, b) = (anchors[next - 1], anchors[next]);
            let frac = (pairs[i].t1_s - pairs[a].t1_s) / (pairs[b].t1_s - pairs[a].t1_s);
            f_hat[a] + frac * (f_hat[b] - f_hat[a])
        };
    }
    Ok(CfoTrack { f_hat_hz: f_hat, fitted, windows, passthrough: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::wrap;
    use crate::scenario::{schedule_exchanges, ScenarioConfig};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Synthetic CP pairs from the simplified CSI phases: CFO rotation over
    /// the exchange, random rotations, a slowly drifting range and φ.
    fn synthetic(cfo_hz: f64, seed: u64, duration_s: f64) -> Vec<CpPair> {
        let cfg = ScenarioConfig { duration_s, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t1 = schedule_exchanges(&cfg, &mut rng).unwrap();
        let fc = cfg.ofdm.fc_hz;
        let mut phi: f64 = 0.4;
        let mut prev_t = t1[0];
        t1.iter()
            .enumerate()
            .map(|(i, &t)| {
                phi += TAU * cfo_hz * (t - prev_t);
                prev_t = t;
                let rho = 1e-8 + 3e-10 * t;
                let turnaround = 2.16e-4 + rng.random_range(0.0..1e-7);
                let t4 = t + 2.0 * rho + turnaround;
                let n2 = rng.random_range(0..2) as f64;
                let n4 = rng.random_range(0..2) as f64;
                let carrier = -TAU * fc * rho;
                CpPair {
                    p: i + 1,
                    psi2_rad: wrap(TAU * n2 / 2.0 - phi + carrier),
                    psi4_rad: wrap(TAU * n4 / 2.0 + phi + carrier - TAU * fc * 1e-9 + TAU * cfo_hz * (t4 - t)),
                    t1_s: t,
                    t4_s: t4,
                    coarse_cfo_hz: cfo_hz + rng.random_range(-5e3..=5e3),
                }
            })
            .collect()
    }

    #[test]
    fn zero_offset_recovers_zero() {
        let pairs = synthetic(0.0, 1, 5.0);
        let track = refine_cfo(&pairs, &CfoSearch::default()).unwrap();
        assert!(!track.passthrough);
        for f in &track.f_hat_hz {
            assert!(f.abs() <= 1.0, "f = {f}");
        }
    }

    #[test]
    fn recovers_26_khz() {
        let pairs = synthetic(26e3, 2, 10.0);
        let track = refine_cfo(&pairs, &CfoSearch::default()).unwrap();
        for (f, fit) in track.f_hat_hz.iter().zip(&track.fitted) {
            assert!((f - 26e3).abs() <= 5.0, "f = {f}, fitted = {fit}");
        }
    }

    #[test]
    fn too_few_pairs_passes_coarse_through() {
        let pairs: Vec<CpPair> = (0..3)
            .map(|i| CpPair {
                p: i + 1,
                psi2_rad: 0.0,
                psi4_rad: 0.0,
                t1_s: i as f64 * 3e-4,
                t4_s: i as f64 * 3e-4 + 2e-4,
                coarse_cfo_hz: 100.0 * i as f64,
            })
            .collect();
        let track = refine_cfo(&pairs, &CfoSearch::default()).unwrap();
        assert!(track.passthrough);
        assert_eq!(track.windows[0].members.len(), 2);
        assert_eq!(track.f_hat_hz, vec![0.0, 100.0, 200.0]);
    }

    #[test]
    fn within_precision_of_window_mean() {
        let pairs = synthetic(21e3, 3, 5.0);
        let search = CfoSearch::default();
        let track = refine_cfo(&pairs, &search).unwrap();
        for w in &track.windows {
            for &i in &w.members {
                assert!((track.f_hat_hz[i] - w.mean_coarse_hz).abs() <= search.precision_hz);
            }
        }
    }

    #[test]
    fn rejects_unsorted() {
        let mut pairs = synthetic(0.0, 1, 1.0);
        pairs.swap(3, 4);
        assert!(refine_cfo(&pairs, &CfoSearch::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn finer_grid_does_not_move_the_peak(seed in any::<u64>(), cfo in 2e4f64..3e4) {
            let pairs = synthetic(cfo, seed, 1.0);
            let members: Vec<usize> = (1..pairs.len())
                .filter(|&i| pairs[i].t1_s - pairs[i - 1].t1_s < 1e-3 && pairs[i].t1_s <= pairs[0].t1_s + 0.5)
                .collect();
            let terms: Vec<PairTerm> = members.iter().map(|&i| {
                let (a, b) = (&pairs[i - 1], &pairs[i]);
                PairTerm {
                    phasor: Complex64::from_polar(1.0, 2.0 * (b.psi4_rad - b.psi2_rad - a.psi4_rad + a.psi2_rad)),
                    interval_s: b.t4_s + b.t1_s - a.t4_s - a.t1_s,
                }
            }).collect();
            let base = members.iter().map(|&i| pairs[i].coarse_cfo_hz).sum::<f64>() / members.len() as f64;
            let step = grid_step(&terms, 2.0);
            let coarse = argmax_cfo(&terms, 2.0, base, 5e3, step);
            let fine = argmax_cfo(&terms, 2.0, base, 5e3, step / 10.0);
            prop_assert!((coarse - fine).abs() < step);
        }
    }
}

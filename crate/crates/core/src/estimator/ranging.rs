//! Sum-CP and differential/relative range.
//!
//! `Ψ_p = wrap(N(ψ2 + ψ4) − 2πN f̂ (t4 − t1))` tracks `−4πN fc A_p / c`
//! modulo 2π, so adjacent increments give the differential range
//! unambiguously while it stays below `c/(4N fc)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CfoTrack, CpPair, EstimatorError};
use crate::phase::wrap;
use crate::SPEED_OF_LIGHT;

/// Half-width of the neighbourhood used for the speed estimate (s).
pub const SPEED_NEIGHBOURHOOD_S: f64 = 0.25;
const SPEED_GRID: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumCp {
    pub p: usize,
    pub psi_rad: f64,
    pub t1_s: f64,
    pub t4_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SumCpSeries {
    pub entries: Vec<SumCp>,
}

/// How the robust estimator extrapolates the phase increment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaForm {
    /// `Θ_p = Σ_{q∈Q_p} 4πN fc Ŝ_p (t_p − t_q)/c`.
    #[default]
    Verbatim,
    /// `Θ_p = 4πN fc Ŝ_p (t_p − t_{p−1})/c`.
    PerPair,
}

impl std::str::FromStr for ThetaForm {
    type Err = EstimatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "verbatim" => Ok(ThetaForm::Verbatim),
            "per-pair" => Ok(ThetaForm::PerPair),
            other => Err(EstimatorError::InvalidInput(format!("unknown extrapolation form {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeStep {
    pub p: usize,
    pub t1_s: f64,
    pub dhat_m: f64,
    pub shat_mps: Option<f64>,
    pub theta_rad: Option<f64>,
}

/// Differential range estimates for the 2nd exchange onward.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RangeSeries {
    /// Label and time of the first exchange (which has no estimate).
    pub first_p: usize,
    pub first_t1_s: f64,
    pub steps: Vec<RangeStep>,
}

impl RangeSeries {
    /// Number of exchanges covered, including the first.
    pub fn len(&self) -> usize {
        if self.steps.is_empty() && self.first_p == 0 {
            0
        } else {
            self.steps.len() + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dhat(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.dhat_m)
    }

    fn from_steps(series: &SumCpSeries, steps: Vec<RangeStep>) -> Self {
        Self { first_p: series.entries[0].p, first_t1_s: series.entries[0].t1_s, steps }
    }
}

/// `wrap(N(ψ2 + ψ4) − 2πN f̂ (t4 − t1))`.
pub fn sum_cp(pair: &CpPair, f_hat_hz: f64, rotation_modulus: u32) -> f64 {
    let n = rotation_modulus as f64;
    // whole cycles of the (large) CFO term drop out of the wrap
    let cycles = n * f_hat_hz * (pair.t4_s - pair.t1_s);
    wrap(n * (pair.psi2_rad + pair.psi4_rad) - 2.0 * PI * (cycles - cycles.round()))
}

pub fn sum_cp_series(pairs: &[CpPair], track: &CfoTrack, rotation_modulus: u32) -> Result<SumCpSeries, EstimatorError> {
    if pairs.len() != track.f_hat_hz.len() {
        return Err(EstimatorError::InvalidInput(format!(
            "{} exchanges but {} CFO values",
            pairs.len(),
            track.f_hat_hz.len()
        )));
    }
    Ok(SumCpSeries {
        entries: pairs
            .iter()
            .zip(&track.f_hat_hz)
            .map(|(pair, &f)| SumCp { p: pair.p, psi_rad: sum_cp(pair, f, rotation_modulus), t1_s: pair.t1_s, t4_s: pair.t4_s })
            .collect(),
    })
}

fn phase_to_range(phase: f64, n: f64, fc: f64) -> f64 {
    -SPEED_OF_LIGHT * phase / (4.0 * PI * n * fc)
}

fn check_series(series: &SumCpSeries) -> Result<(), EstimatorError> {
    if series.entries.len() < 2 {
        return Err(EstimatorError::InvalidInput("need at least two exchanges".into()));
    }
    Ok(())
}

/// One-shot estimate `D̂_p = −c·wrap(Ψ_p − Ψ_{p−1})/(4πN fc)`.
pub fn differential_range(series: &SumCpSeries, rotation_modulus: u32, fc_hz: f64) -> Result<RangeSeries, EstimatorError> {
    check_series(series)?;
    let n = rotation_modulus as f64;
    let steps = series
        .entries
        .windows(2)
        .map(|w| RangeStep {
            p: w[1].p,
            t1_s: w[1].t1_s,
            dhat_m: phase_to_range(wrap(w[1].psi_rad - w[0].psi_rad), n, fc_hz),
            shat_mps: None,
            theta_rad: None,
        })
        .collect();
    Ok(RangeSeries::from_steps(series, steps))
}

/// Nearest-rank percentile (`pct` in (0, 100]) of unsorted data.
pub fn percentile_nearest_rank(values: &[f64], pct: f64) -> Option<f64> {
    if values.is_empty() || !(pct > 0.0 && pct <= 100.0) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// `S_max = c / (4N fc · percentile80{t1_p − t1_{p−1}})`.
pub fn max_resolvable_speed(t1_s: &[f64], rotation_modulus: u32, fc_hz: f64) -> Option<f64> {
    let gaps: Vec<f64> = t1_s.windows(2).map(|w| w[1] - w[0]).collect();
    let p80 = percentile_nearest_rank(&gaps, 80.0)?;
    Some(SPEED_OF_LIGHT / (4.0 * rotation_modulus as f64 * fc_hz * p80))
}

/// `|Σ_q e^{j(Ψ_q − Ψ_p + κ (t_q − t_p) s)}|` maximised over `|s| ≤ S_max`
/// on a uniform grid with parabolic refinement.
fn speed_estimate(rel: &[(f64, f64)], k: f64, s_max: f64) -> f64 {
    let step = 2.0 * s_max / (SPEED_GRID - 1) as f64;
    let score = |s: f64| -> f64 {
        rel.iter().map(|&(dpsi, dt)| Complex64::from_polar(1.0, dpsi + k * dt * s)).sum::<Complex64>().norm()
    };
    let mut current: Vec<Complex64> = rel.iter().map(|&(dpsi, dt)| Complex64::from_polar(1.0, dpsi - k * dt * s_max)).collect();
    let rot: Vec<Complex64> = rel.iter().map(|&(_, dt)| Complex64::from_polar(1.0, k * dt * step)).collect();
    let mut values = Vec::with_capacity(SPEED_GRID);
    for _ in 0..SPEED_GRID {
        values.push(current.iter().sum::<Complex64>().norm());
        for (c, r) in current.iter_mut().zip(&rot) {
            *c *= r;
        }
    }
    let best = (0..SPEED_GRID).max_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    let s_best = -s_max + best as f64 * step;
    if best == 0 || best == SPEED_GRID - 1 {
        return s_best;
    }
    let (l, c, r) = (score(s_best - step), score(s_best), score(s_best + step));
    let denom = l - 2.0 * c + r;
    let offset = if denom < 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
    (s_best + offset.clamp(-1.0, 1.0) * step).clamp(-s_max, s_max)
}

/// Speed-aided estimate
/// `D̂_p = −c·(wrap(Ψ_p − Ψ_{p−1} + Θ_p) − Θ_p)/(4πN fc)`.
///
/// Exchanges with no neighbour within ±0.25 s fall back to the one-shot
/// estimate.
pub fn differential_range_robust(
    series: &SumCpSeries,
    rotation_modulus: u32,
    fc_hz: f64,
    form: ThetaForm,
) -> Result<RangeSeries, EstimatorError> {
    check_series(series)?;
    let n = rotation_modulus as f64;
    let e = &series.entries;
    let t1: Vec<f64> = e.iter().map(|x| x.t1_s).collect();
    let s_max = max_resolvable_speed(&t1, rotation_modulus, fc_hz)
        .filter(|s| s.is_finite() && *s > 0.0)
        .ok_or_else(|| EstimatorError::Degenerate("exchange spacing does not define a maximum speed".into()))?;
    let k = 4.0 * PI * n * fc_hz / SPEED_OF_LIGHT;

    let (mut lo, mut hi) = (0usize, 0usize);
    let mut steps = Vec::with_capacity(e.len() - 1);
    for p in 0..e.len() {
        while t1[p] - t1[lo] > SPEED_NEIGHBOURHOOD_S {
            lo += 1;
        }
        while hi + 1 < e.len() && t1[hi + 1] - t1[p] <= SPEED_NEIGHBOURHOOD_S {
            hi += 1;
        }
        if p == 0 {
            continue;
        }
        let dpsi = e[p].psi_rad - e[p - 1].psi_rad;
        if hi == lo {
            steps.push(RangeStep {
                p: e[p].p,
                t1_s: t1[p],
                dhat_m: phase_to_range(wrap(dpsi), n, fc_hz),
                shat_mps: None,
                theta_rad: None,
            });
            continue;
        }
        let rel: Vec<(f64, f64)> = (lo..=hi).map(|q| (e[q].psi_rad - e[p].psi_rad, t1[q] - t1[p])).collect();
        let s_hat = speed_estimate(&rel, k, s_max);
        let theta = match form {
            ThetaForm::Verbatim => (lo..=hi).map(|q| k * s_hat * (t1[p] - t1[q])).sum(),
            ThetaForm::PerPair => k * s_hat * (t1[p] - t1[p - 1]),
        };
        steps.push(RangeStep {
            p: e[p].p,
            t1_s: t1[p],
            dhat_m: phase_to_range(wrap(dpsi + theta) - theta, n, fc_hz),
            shat_mps: Some(s_hat),
            theta_rad: Some(theta),
        });
    }
    Ok(RangeSeries::from_steps(series, steps))
}

/// `R̂_{q,p} = Σ_{a=q+1}^{p} D̂_a` with 1-based positions in the series;
/// `R̂_{q,q} = 0`.
pub fn relative_range(ranges: &RangeSeries, q: usize, p: usize) -> Result<f64, EstimatorError> {
    let len = ranges.len();
    for index in [q, p] {
        if index == 0 || index > len {
            return Err(EstimatorError::IndexOutOfRange { index, len });
        }
    }
    if q > p {
        return Err(EstimatorError::InvalidInput(format!("q = {q} must not exceed p = {p}")));
    }
    // steps[i] holds D̂ of position i + 2
    Ok(ranges.steps[q - 1..p - 1].iter().map(|s| s.dhat_m).sum())
}

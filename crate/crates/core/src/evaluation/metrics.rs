//! Error metrics for one epoch.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::estimator::RangeSeries;
use crate::phase::wrap_period;
use crate::scenario::EpochTruth;
use crate::SPEED_OF_LIGHT;

/// `D̂_p − D_p` (m) for `p ≥ 2`.
pub fn differential_errors(est: &RangeSeries, truth: &EpochTruth) -> Result<Vec<f64>, EvalError> {
    if est.len() != truth.len() {
        return Err(EvalError::LengthMismatch { est: est.len(), truth: truth.len() });
    }
    est.steps
        .iter()
        .zip(&truth.exchanges[1.min(truth.len())..])
        .enumerate()
        .map(|(i, (step, t))| match t.diff_range_m {
            Some(d) if step.p == t.p => Ok(step.dhat_m - d),
            _ => Err(EvalError::Misaligned { position: i + 2 }),
        })
        .collect()
}

/// Root mean square of errors in metres, reported in mm.
pub fn rmse_mm(errors_m: &[f64]) -> Option<f64> {
    if errors_m.is_empty() {
        return None;
    }
    Some((errors_m.iter().map(|e| e * e).sum::<f64>() / errors_m.len() as f64).sqrt() * 1e3)
}

/// Differential-range RMSE of one epoch, in mm.
pub fn rmse_differential(est: &RangeSeries, truth: &EpochTruth) -> Result<f64, EvalError> {
    let errors = differential_errors(est, truth)?;
    rmse_mm(&errors).ok_or(EvalError::LengthMismatch { est: est.len(), truth: truth.len() })
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 { values[m] } else { 0.5 * (values[m - 1] + values[m]) })
}

/// 0-based index pairs `(q, p)`, `q < p`, with `t_p − t_q` within half the
/// median spacing of `gap_s`. `t_s` must be sorted.
pub fn gap_pairs(t_s: &[f64], gap_s: f64) -> Vec<(usize, usize)> {
    let mut spacing: Vec<f64> = t_s.windows(2).map(|w| w[1] - w[0]).collect();
    let Some(tol) = median(&mut spacing).map(|m| 0.5 * m) else {
        return Vec::new();
    };
    let mut pairs = Vec::new();
    for (q, &tq) in t_s.iter().enumerate() {
        let lo = t_s.partition_point(|&t| t < tq + gap_s - tol).max(q + 1);
        let hi = t_s.partition_point(|&t| t <= tq + gap_s + tol);
        pairs.extend((lo..hi).map(|p| (q, p)));
    }
    pairs
}

/// `R̂_{q,p} − R_{q,p}` (m) over all pairs `gap_s` apart.
pub fn relative_errors(est: &RangeSeries, truth: &EpochTruth, gap_s: f64) -> Result<Vec<f64>, EvalError> {
    let d_err = differential_errors(est, truth)?;
    // cumulative error telescopes: R̂ − R between q and p is Σ_{q<a≤p} (D̂_a − D_a)
    let mut cum = Vec::with_capacity(d_err.len() + 1);
    cum.push(0.0);
    let mut acc = 0.0;
    for e in &d_err {
        acc += e;
        cum.push(acc);
    }
    let t: Vec<f64> = truth.exchanges.iter().map(|x| x.t1_s).collect();
    let pairs = gap_pairs(&t, gap_s);
    if pairs.is_empty() {
        return Err(EvalError::NoPairs { gap_s });
    }
    Ok(pairs.into_iter().map(|(q, p)| cum[p] - cum[q]).collect())
}

/// Half-wavelength ambiguity `c/(2N fc)` of the relative range (m).
pub fn wrap_period_m(rotation_modulus: u32, fc_hz: f64) -> f64 {
    SPEED_OF_LIGHT / (2.0 * rotation_modulus as f64 * fc_hz)
}

/// Probability mass of wrapped errors over equal bins of `[−P/2, P/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub period_m: f64,
    pub mass: Vec<f64>,
    pub count: usize,
}

impl Histogram {
    pub fn from_errors(errors_m: &[f64], period_m: f64, bins: usize) -> Self {
        let mut mass = vec![0.0; bins];
        for &e in errors_m {
            let w = wrap_period(e, period_m);
            let b = (((w / period_m + 0.5) * bins as f64) as usize).min(bins - 1);
            mass[b] += 1.0;
        }
        if !errors_m.is_empty() {
            let n = errors_m.len() as f64;
            mass.iter_mut().for_each(|m| *m /= n);
        }
        Self { period_m, mass, count: errors_m.len() }
    }

    pub fn bins(&self) -> usize {
        self.mass.len()
    }

    pub fn bin_width_m(&self) -> f64 {
        self.period_m / self.bins() as f64
    }

    pub fn bin_center_m(&self, b: usize) -> f64 {
        (b as f64 + 0.5) * self.bin_width_m() - 0.5 * self.period_m
    }

    /// Density (1/m) of bin `b`.
    pub fn density(&self, b: usize) -> f64 {
        self.mass[b] / self.bin_width_m()
    }

    /// `Σ |a_b − b_b|` over bin masses, in `[0, 2]`.
    pub fn l1_distance(&self, other: &Histogram) -> Result<f64, EvalError> {
        if self.bins() != other.bins() || self.period_m != other.period_m {
            return Err(EvalError::Incomparable(format!(
                "{} bins over {} m vs {} bins over {} m",
                self.bins(),
                self.period_m,
                other.bins(),
                other.period_m
            )));
        }
        Ok(self.mass.iter().zip(&other.mass).map(|(a, b)| (a - b).abs()).sum())
    }
}

/// PDF of the relative-range error `gap_s` apart, modulo `c/(2N fc)`.
pub fn relative_error_pdf(
    est: &RangeSeries,
    truth: &EpochTruth,
    gap_s: f64,
    rotation_modulus: u32,
    fc_hz: f64,
    bins: usize,
) -> Result<Histogram, EvalError> {
    if bins == 0 {
        return Err(EvalError::InvalidSpec("histogram needs at least one bin".into()));
    }
    let errors = relative_errors(est, truth, gap_s)?;
    Ok(Histogram::from_errors(&errors, wrap_period_m(rotation_modulus, fc_hz), bins))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least-squares line through `(x, y)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit { slope, intercept: my - slope * mx, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::RangeStep;
    use crate::scenario::ExchangeTruth;
    use crate::waveform::ImpairmentDraw;

    fn truth(t: &[f64], ranges: &[f64]) -> EpochTruth {
        EpochTruth {
            sta2_clock_offset_s: 0.0,
            oscillator_phase_rad: 0.0,
            exchanges: t
                .iter()
                .zip(ranges)
                .enumerate()
                .map(|(i, (&t1_s, &range_m))| ExchangeTruth {
                    p: i + 1,
                    t1_s,
                    t4_s: t1_s + 2e-4,
                    rho_s: range_m / SPEED_OF_LIGHT,
                    range_m,
                    diff_range_m: (i > 0).then(|| range_m - ranges[i - 1]),
                    draw: ImpairmentDraw::default(),
                    path_delays_s: vec![],
                })
                .collect(),
        }
    }

    fn est(truth: &EpochTruth, err_m: &[f64]) -> RangeSeries {
        RangeSeries {
            first_p: 1,
            first_t1_s: truth.exchanges[0].t1_s,
            steps: truth.exchanges[1..]
                .iter()
                .zip(err_m)
                .map(|(x, e)| RangeStep {
                    p: x.p,
                    t1_s: x.t1_s,
                    dhat_m: x.diff_range_m.unwrap() + e,
                    shat_mps: None,
                    theta_rad: None,
                })
                .collect(),
        }
    }

    fn ramp(n: usize) -> EpochTruth {
        let t: Vec<f64> = (0..n).map(|i| i as f64 * 0.025).collect();
        let r: Vec<f64> = t.iter().map(|t| 3.0 + 0.1 * t).collect();
        truth(&t, &r)
    }

    #[test]
    fn rmse_examples() {
        let tr = ramp(4);
        assert_eq!(rmse_differential(&est(&tr, &[0.0; 3]), &tr).unwrap(), 0.0);
        assert!((rmse_differential(&est(&tr, &[1e-3; 3]), &tr).unwrap() - 1.0).abs() < 1e-9);
        let mixed = rmse_differential(&est(&tr, &[0.0, 3e-3, -4e-3]), &tr).unwrap();
        assert!((mixed - (25.0f64 / 3.0).sqrt()).abs() < 1e-9);
        assert!((mixed - 2.8868).abs() < 1e-4);
    }

    #[test]
    fn misalignment_is_an_error() {
        let tr = ramp(4);
        let short = ramp(3);
        assert_eq!(
            rmse_differential(&est(&short, &[0.0; 2]), &tr),
            Err(EvalError::LengthMismatch { est: 3, truth: 4 })
        );
        let mut shifted = est(&tr, &[0.0; 3]);
        shifted.steps[1].p = 9;
        assert_eq!(rmse_differential(&shifted, &tr), Err(EvalError::Misaligned { position: 3 }));
    }

    #[test]
    fn wrap_period_of_default_carrier() {
        let p = wrap_period_m(2, 5.2e9);
        assert!((p * 1e3 - 14.423).abs() < 1e-3);
    }

    #[test]
    fn exact_estimates_give_a_delta_at_zero() {
        let tr = ramp(200);
        let h = relative_error_pdf(&est(&tr, &[0.0; 199]), &tr, 1.0, 2, 5.2e9, 40).unwrap();
        assert_eq!(h.mass[20], 1.0);
        assert!(h.bin_center_m(20) > 0.0 && h.bin_center_m(19) < 0.0);
        assert_eq!(h.count, 160);
        assert!((h.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relative_errors_accumulate_and_wrap() {
        let tr = ramp(200);
        // one +8 mm slip at position 50 pushes every spanning pair past P/2
        let mut err = vec![0.0; 199];
        err[48] = 8e-3;
        let rel = relative_errors(&est(&tr, &err), &tr, 0.5).unwrap();
        assert!(rel.iter().any(|&e| (e - 8e-3).abs() < 1e-12));
        let h = relative_error_pdf(&est(&tr, &err), &tr, 0.5, 2, 5.2e9, 8).unwrap();
        // 8 mm wraps to 8 − 14.423 = −6.42 mm, bin 0 of [−7.21, 7.21)
        assert!(h.mass[0] > 0.0);
        assert_eq!(h.mass[1..4].iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn telescoping_matches_relative_range() {
        let tr = ramp(50);
        let err: Vec<f64> = (0..49).map(|i| ((i * 37) % 11) as f64 * 1e-4).collect();
        let e = est(&tr, &err);
        let rel = relative_errors(&e, &tr, 0.25).unwrap();
        let pairs = gap_pairs(&tr.exchanges.iter().map(|x| x.t1_s).collect::<Vec<_>>(), 0.25);
        for ((q, p), r) in pairs.into_iter().zip(rel) {
            let rhat = crate::estimator::relative_range(&e, q + 1, p + 1).unwrap();
            let rtrue = tr.exchanges[p].range_m - tr.exchanges[q].range_m;
            assert!((rhat - rtrue - r).abs() < 1e-12);
        }
    }

    #[test]
    fn pairs_respect_tolerance() {
        // median spacing 0.1 → tolerance 0.05
        let t = [0.0, 0.1, 0.2, 0.3, 0.36, 0.5];
        assert_eq!(gap_pairs(&t, 0.3), vec![(0, 3), (1, 4), (2, 5)]);
        assert!(gap_pairs(&t, 5.0).is_empty());
        assert!(gap_pairs(&[1.0], 0.0).is_empty());
        let tr = ramp(10);
        assert_eq!(relative_errors(&est(&tr, &[0.0; 9]), &tr, 5.0), Err(EvalError::NoPairs { gap_s: 5.0 }));
    }

    #[test]
    fn histogram_distance() {
        let a = Histogram::from_errors(&[0.0, 1e-3], 0.0144, 4);
        let b = Histogram::from_errors(&[0.0, -5e-3], 0.0144, 4);
        assert!((a.l1_distance(&b).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(a.l1_distance(&a).unwrap(), 0.0);
        assert!(a.l1_distance(&Histogram::from_errors(&[0.0], 0.0144, 5)).is_err());
        assert!((a.density(2) * a.bin_width_m() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_of_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let f = linear_fit(&x, &[3.0, 5.0, 7.0, 9.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let g = linear_fit(&x, &[1.0, 3.0, 1.0, 3.0]).unwrap();
        assert!((g.r_squared - 0.2).abs() < 1e-12);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
        assert!(linear_fit(&[1.0, 1.0], &[1.0, 2.0]).is_none());
    }
}

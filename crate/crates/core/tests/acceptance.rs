//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::f64::consts::TAU;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use carrier_ranging::estimator::{
    differential_range, extract_cp, refine_cfo, sum_cp, sum_cp_series, CfoSearch, CfoTrack, CpPair, Method, SumCp,
    SumCpSeries,
};
use carrier_ranging::evaluation::{linear_fit, run_sweep, speed_knee, Axis, Report, SweepSpec};
use carrier_ranging::phase::wrap;
use carrier_ranging::scenario::{
    oscillator_offset, schedule_exchanges, simulate_epoch_seeded, Observation, ScenarioConfig,
};
use carrier_ranging::waveform::{oracle_grid, OfdmConfig, ORACLE_STEPS};

const FC: f64 = 5.2e9;
const N: u32 = 2;
const SPEEDS: [f64; 6] = [0.1, 0.15, 0.2, 0.25, 0.3, 0.35];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sweep(axis: Axis, values: Vec<f64>, base: ScenarioConfig) -> Report {
    let spec = SweepSpec { methods: vec![Method::SumCp, Method::Ftm], ..SweepSpec::new(axis, values, base) };
    run_sweep(&spec).expect("sweep runs")
}

/// Sweeps shared by several criteria. The κ = 1000 and 30 dB points are the
/// S = 0.1 m/s row of the speed sweep (same scenario, same epoch seeds).
struct Sweeps {
    speed: Report,
    kappa: Report,
    snr10: Report,
}

impl Sweeps {
    fn run() -> Self {
        let base = ScenarioConfig::default();
        Self {
            speed: sweep(Axis::Speed, SPEEDS.to_vec(), base.clone()),
            kappa: sweep(Axis::Kfactor, vec![3.0, 7.0, 30.0], base.clone()),
            snr10: sweep(Axis::Snr, vec![10.0], base),
        }
    }

    fn headline(&self, method: Method) -> f64 {
        self.speed.rmse_mm(0.1, method).unwrap()
    }

    fn kappa(&self, k: f64) -> f64 {
        if k == 1000.0 {
            self.headline(Method::SumCp)
        } else {
            self.kappa.rmse_mm(k, Method::SumCp).unwrap()
        }
    }
}

fn criterion_1() -> Outcome {
    let cases = oracle_grid(&OfdmConfig::default(), ORACLE_STEPS).unwrap();
    let max = cases.iter().map(|c| c.max_phase_dev_rad).fold(0.0, f64::max);
    let eta0 = cases.iter().filter(|c| c.eta == 0.0).map(|c| c.max_phase_dev_rad).fold(0.0, f64::max);
    outcome(
        max < 1e-3 && eta0 < 1e-9,
        format!("{} cases, max phase error {max:.3e} rad (< 1e-3), at eta = 0 {eta0:.3e} rad (< 1e-9)", cases.len()),
    )
}

fn criterion_2() -> Outcome {
    let cfg = ScenarioConfig { kappa: f64::INFINITY, snr_db: f64::INFINITY, ..ScenarioConfig::default() };
    let (records, truth) = simulate_epoch_seeded(&cfg, 2024).unwrap();
    let pairs: Vec<CpPair> = records
        .iter()
        .zip(&truth.exchanges)
        .map(|(r, t)| {
            let Observation::Csi { fwd, bwd } = &r.observation else { panic!("CSI expected") };
            CpPair {
                p: r.p,
                psi2_rad: extract_cp(fwd, t.draw.tau2_s, &cfg.ofdm).unwrap(),
                psi4_rad: extract_cp(bwd, t.draw.tau4_s, &cfg.ofdm).unwrap(),
                t1_s: r.t1_s,
                t4_s: r.t4_s,
                coarse_cfo_hz: r.coarse_cfo_hz,
            }
        })
        .collect();
    let f: Vec<f64> = truth.exchanges.iter().map(|t| t.draw.eta * FC).collect();
    let track = CfoTrack { fitted: vec![true; f.len()], f_hat_hz: f, windows: vec![], passthrough: false };
    let ranges = differential_range(&sum_cp_series(&pairs, &track, N).unwrap(), N, FC).unwrap();
    let max = ranges
        .dhat()
        .zip(&truth.exchanges[1..])
        .map(|(d, t)| (d - t.diff_range_m.unwrap()).abs())
        .fold(0.0, f64::max);
    outcome(max < 1e-6, format!("{} exchanges, max |D^ - D| = {:.3e} um (< 1 um)", records.len(), max * 1e6))
}

fn criterion_3(s: &Sweeps) -> Outcome {
    let r = s.headline(Method::SumCp);
    outcome(r <= 2.0, format!("sum-CP RMSE {r:.4} mm (<= 2 mm) over 10 epochs"))
}

fn criterion_4(s: &Sweeps) -> Outcome {
    let (a, b) = (s.headline(Method::Ftm), s.headline(Method::SumCp));
    outcome(a / b >= 50.0, format!("FTM {a:.3} mm / sum-CP {b:.4} mm = {:.0} (>= 50)", a / b))
}

fn criterion_5(s: &Sweeps) -> Outcome {
    let rmse: Vec<f64> = SPEEDS.iter().map(|&v| s.speed.rmse_mm(v, Method::SumCp).unwrap()).collect();
    let ratio = rmse[5] / rmse[1];
    let knee = speed_knee(&SPEEDS, &rmse);
    let knee_ok = knee.is_some_and(|k| (0.2..=0.3).contains(&k));
    let listing: Vec<String> = SPEEDS.iter().zip(&rmse).map(|(v, r)| format!("{v}:{r:.3}")).collect();
    outcome(
        ratio >= 10.0 && knee_ok,
        format!("RMSE(0.35)/RMSE(0.15) = {ratio:.1} (>= 10), knee {knee:?} m/s (in [0.2, 0.3]); mm by speed {}", listing.join(" ")),
    )
}

fn criterion_6(s: &Sweeps) -> Outcome {
    let r: Vec<(f64, f64)> = [3.0, 7.0, 30.0, 1000.0].iter().map(|&k| (k, s.kappa(k))).collect();
    let bounded = r.iter().filter(|(k, _)| *k >= 7.0).all(|(_, v)| *v <= 2.0);
    let ordered = r[0].1 > r[1].1;
    let listing: Vec<String> = r.iter().map(|(k, v)| format!("{k}:{v:.3}")).collect();
    outcome(
        bounded && ordered,
        format!("RMSE <= 2 mm for kappa >= 7: {bounded}, RMSE(3) > RMSE(7): {ordered}; mm by kappa {}", listing.join(" ")),
    )
}

fn criterion_7() -> Outcome {
    let base = ScenarioConfig { kappa: 7.0, snr_db: f64::INFINITY, ..ScenarioConfig::default() };
    let gaps: Vec<f64> = (1..=20).map(f64::from).collect();
    let spec = SweepSpec { methods: vec![Method::SumCp], ..SweepSpec::new(Axis::Timegap, gaps.clone(), base) };
    let report = run_sweep(&spec).unwrap();
    let rmse: Vec<f64> = gaps.iter().map(|&t| report.rmse_mm(t, Method::SumCp).unwrap()).collect();
    let at20 = rmse[19];
    let fit = linear_fit(&gaps, &rmse).unwrap();
    let hist = |t: f64| report.row(t, Method::SumCp).unwrap().histogram.clone().unwrap();
    let l1 = hist(2.0).l1_distance(&hist(5.0)).unwrap();
    outcome(
        at20 <= 10.0 && fit.r_squared >= 0.9 && l1 <= 0.2,
        format!(
            "RMSE(T=20 s) {at20:.3} mm (<= 10), linear fit over T in [1, 20] s slope {:.4} mm/s R^2 {:.3} (>= 0.9), \
             PDF L1(T=2, T=5) {l1:.3} (<= 0.2); RMSE(T=1) {:.3} mm",
            fit.slope, fit.r_squared, rmse[0]
        ),
    )
}

/// Synthetic carrier phases with a drifting CFO: `ψ2 + ψ4` carries the
/// range terms, random rotations and `2π f (t4 − t1)`.
fn synthetic_pairs(seed: u64) -> (Vec<CpPair>, Vec<f64>) {
    let cfg = ScenarioConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t1 = schedule_exchanges(&cfg, &mut rng).unwrap();
    let osc_phase = rng.random_range(0.0..TAU);
    let cfo = |t: f64| FC * oscillator_offset(t, &cfg.oscillator, osc_phase);
    let mut phi = rng.random_range(0.0..TAU);
    let mut prev = t1[0];
    let mut truth = Vec::new();
    let pairs = t1
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            phi += 0.5 * TAU * (cfo(t) + cfo(prev)) * (t - prev);
            prev = t;
            let rho = 1e-8 + 3.3e-10 * t;
            let t4 = t + 2.0 * rho + 2.16e-4 + rng.random_range(-2e-7..2e-7);
            let carrier = -TAU * FC * rho;
            let n2 = rng.random_range(0..N) as f64;
            let n4 = rng.random_range(0..N) as f64;
            truth.push(cfo(t));
            CpPair {
                p: i + 1,
                psi2_rad: wrap(TAU * n2 / N as f64 - phi + carrier),
                psi4_rad: wrap(TAU * n4 / N as f64 + phi + carrier - TAU * FC * 1e-9 + TAU * cfo(t) * (t4 - t)),
                t1_s: t,
                t4_s: t4,
                coarse_cfo_hz: cfo(t) + rng.random_range(-5e3..=5e3),
            }
        })
        .collect();
    (pairs, truth)
}

fn series(psi: &[f64], t: &[f64]) -> SumCpSeries {
    SumCpSeries {
        entries: psi
            .iter()
            .zip(t)
            .enumerate()
            .map(|(i, (&psi_rad, &t1_s))| SumCp { p: i + 1, psi_rad, t1_s, t4_s: t1_s + 2.2e-4 })
            .collect(),
    }
}

fn criterion_8(s: &Sweeps) -> Outcome {
    let mut runner = TestRunner::new(Config { cases: 256, failure_persistence: None, ..Config::default() });
    let pair = (-3.2f64..3.2, -3.2f64..3.2, 0.0f64..30.0, 1e-4f64..3e-4, -1e5f64..1e5);
    let mut checks: Vec<(&str, bool)> = Vec::new();

    let rotation = runner.run(&(pair.clone(), 0..N, 0..N), |((a, b, t, dt, f), n2, n4)| {
        let p = CpPair { p: 1, psi2_rad: a, psi4_rad: b, t1_s: t, t4_s: t + dt, coarse_cfo_hz: 0.0 };
        let q = CpPair {
            psi2_rad: wrap(a + TAU * n2 as f64 / N as f64),
            psi4_rad: wrap(b + TAU * n4 as f64 / N as f64),
            ..p
        };
        prop_assert!(wrap(sum_cp(&p, f, N) - sum_cp(&q, f, N)).abs() < 1e-9);
        Ok(())
    });
    checks.push(("rotation slip", rotation.is_ok()));

    let phi = runner.run(&(pair.clone(), -10.0f64..10.0), |((a, b, t, dt, f), phi)| {
        let p = CpPair { p: 1, psi2_rad: a, psi4_rad: b, t1_s: t, t4_s: t + dt, coarse_cfo_hz: 0.0 };
        let q = CpPair { psi2_rad: wrap(a - phi), psi4_rad: wrap(b + phi), ..p };
        prop_assert!(wrap(sum_cp(&p, f, N) - sum_cp(&q, f, N)).abs() < 1e-9);
        Ok(())
    });
    checks.push(("phi cancellation", phi.is_ok()));

    let increments = prop::collection::vec(-2.5f64..2.5, 2..60);
    let shift = runner.run(&(increments.clone(), -10.0f64..10.0), |(inc, c)| {
        let t: Vec<f64> = (0..=inc.len()).map(|i| i as f64 * 0.025).collect();
        let mut psi = vec![0.3];
        inc.iter().for_each(|d| psi.push(wrap(psi.last().unwrap() + d)));
        let shifted: Vec<f64> = psi.iter().map(|p| wrap(p + c)).collect();
        let a = differential_range(&series(&psi, &t), N, FC).unwrap();
        let b = differential_range(&series(&shifted, &t), N, FC).unwrap();
        for (x, y) in a.dhat().zip(b.dhat()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        Ok(())
    });
    checks.push(("delta-rho shift", shift.is_ok()));

    let wraps = runner.run(&(increments, prop::collection::vec(-5i32..5, 61)), |(inc, k)| {
        let t: Vec<f64> = (0..=inc.len()).map(|i| i as f64 * 0.025).collect();
        let mut psi = vec![-1.1];
        inc.iter().for_each(|d| psi.push(wrap(psi.last().unwrap() + d)));
        let lifted: Vec<f64> = psi.iter().zip(&k).map(|(p, k)| p + TAU * *k as f64).collect();
        let a = differential_range(&series(&psi, &t), N, FC).unwrap();
        let b = differential_range(&series(&lifted, &t), N, FC).unwrap();
        for (x, y) in a.dhat().zip(b.dhat()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        Ok(())
    });
    checks.push(("2pi wrap", wraps.is_ok()));

    let r10 = s.snr10.rmse_mm(10.0, Method::SumCp).unwrap();
    let r30 = s.headline(Method::SumCp);
    checks.push(("low SNR", r10 <= 3.0 * r30));

    let mut residuals = Vec::new();
    for seed in 0..3 {
        let (pairs, truth) = synthetic_pairs(seed);
        let track = refine_cfo(&pairs, &CfoSearch::default()).unwrap();
        residuals.extend(track.f_hat_hz.iter().zip(&truth).map(|(f, t)| (f - t).abs()));
    }
    residuals.sort_by(f64::total_cmp);
    let median = residuals[residuals.len() / 2];
    checks.push(("CFO residual", median <= 10.0));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    outcome(
        failed.is_empty(),
        format!(
            "properties {}; RMSE 10 dB {r10:.4} mm vs 3 x {r30:.4} mm; median CFO residual {median:.3} Hz (<= 10); failed: {failed:?}",
            checks.iter().map(|c| c.0).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn criterion_9() -> Outcome {
    let cfg = ScenarioConfig::default();
    let t_max = 1e-3;
    let mut worst_window = usize::MAX;
    let mut counts = Vec::new();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = schedule_exchanges(&cfg, &mut rng).unwrap();
        counts.push(t.len());
        let windows = (cfg.duration_s / 0.5).round() as usize;
        for w in 0..windows {
            let (lo, hi) = (w as f64 * 0.5, (w + 1) as f64 * 0.5);
            let close = t.windows(2).filter(|p| p[0] >= lo && p[1] < hi && p[1] - p[0] < t_max).count();
            worst_window = worst_window.min(close);
        }
    }
    let mut max_rtt: f64 = 0.0;
    for seed in 0..3 {
        let (records, _) = simulate_epoch_seeded(&cfg, seed).unwrap();
        counts.push(records.len());
        max_rtt = records.iter().map(|r| r.t4_s - r.t1_s).fold(max_rtt, f64::max);
    }
    let exact = counts.iter().all(|&c| c == 1440);
    outcome(
        worst_window >= 3 && max_rtt < 1e-3 && exact,
        format!(
            "fewest sub-1 ms spacings in a 0.5 s window {worst_window} (>= 3), max t4 - t1 {:.1} us (< 1000), \
             exchanges per 30 s {:?} (all 1440)",
            max_rtt * 1e6,
            counts.iter().min().zip(counts.iter().max())
        ),
    )
}

fn main() {
    let mut results: Vec<(u32, Outcome)> = Vec::new();
    let mut record = |n: u32, o: Outcome| {
        println!("criterion {n}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, o));
    };
    record(1, criterion_1());
    record(2, criterion_2());
    record(9, criterion_9());
    let sweeps = Sweeps::run();
    record(3, criterion_3(&sweeps));
    record(4, criterion_4(&sweeps));
    record(5, criterion_5(&sweeps));
    record(6, criterion_6(&sweeps));
    record(8, criterion_8(&sweeps));
    record(7, criterion_7());
    results.sort_by_key(|r| r.0);
    let failed: Vec<u32> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

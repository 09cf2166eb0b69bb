//! Parameter sweeps over simulated epochs.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{differential_errors, relative_errors, rmse_mm, wrap_period_m, EvalError, Histogram};
use crate::estimator::{estimate_from_pairs, extract_pairs, Method, PipelineConfig, ThetaForm};
use crate::scenario::{simulate_epoch_seeded, ScenarioConfig};

pub const DEFAULT_EPOCHS: usize = 10;
pub const DEFAULT_HIST_BINS: usize = 36;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// SNR in dB.
    Snr,
    /// STA 2 speed in m/s.
    Speed,
    /// Rician factor κ (linear).
    Kfactor,
    /// Relative-range time gap `T` in s.
    Timegap,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::Snr => "snr",
            Axis::Speed => "speed",
            Axis::Kfactor => "kfactor",
            Axis::Timegap => "timegap",
        }
    }

    /// Scenario for one axis value; the time gap leaves it unchanged.
    pub fn apply(&self, base: &ScenarioConfig, value: f64) -> ScenarioConfig {
        let mut cfg = base.clone();
        match self {
            Axis::Snr => cfg.snr_db = value,
            Axis::Speed => cfg.speed_mps = value,
            Axis::Kfactor => cfg.kappa = value,
            Axis::Timegap => {}
        }
        cfg
    }
}

fn default_epochs() -> usize {
    DEFAULT_EPOCHS
}

fn default_methods() -> Vec<Method> {
    vec![Method::SumCp, Method::Ftm]
}

fn default_bins() -> usize {
    DEFAULT_HIST_BINS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Axis,
    #[serde(with = "crate::io::extended_f64_seq")]
    pub values: Vec<f64>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub base_scenario: ScenarioConfig,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub theta_form: ThetaForm,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

impl SweepSpec {
    pub fn new(axis: Axis, values: Vec<f64>, base_scenario: ScenarioConfig) -> Self {
        Self {
            axis,
            values,
            epochs: DEFAULT_EPOCHS,
            base_scenario,
            methods: default_methods(),
            seed: 0,
            theta_form: ThetaForm::default(),
            histogram_bins: DEFAULT_HIST_BINS,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::InvalidSpec(m));
        if self.values.is_empty() {
            return bad("no axis values".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("no methods".into());
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return bad(format!("method {m} listed twice"));
            }
        }
        if self.histogram_bins == 0 {
            return bad("histogram needs at least one bin".into());
        }
        self.base_scenario.validate()?;
        for &v in &self.values {
            if v.is_nan() {
                return bad("axis value is NaN".into());
            }
            if self.axis == Axis::Timegap {
                if !(v > 0.0 && v < self.base_scenario.duration_s) {
                    return bad(format!("time gap {v} s outside (0, {}) s", self.base_scenario.duration_s));
                }
            } else {
                self.axis.apply(&self.base_scenario, v).validate()?;
            }
        }
        Ok(())
    }
}

/// Per-epoch seeds derived from the sweep seed; shared by every axis value.
pub fn epoch_seeds(seed: u64, epochs: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..epochs).map(|_| rng.next_u64()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub axis: Axis,
    pub value: f64,
    pub method: Method,
    /// Differential-range RMSE, or relative-range RMSE on the time-gap axis.
    pub rmse_mm: f64,
    /// Number of pooled errors.
    pub n: usize,
    pub seeds: Vec<u64>,
    /// Wrapped relative-range error PDF (time-gap axis only).
    pub histogram: Option<Histogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub axis: Axis,
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn row(&self, value: f64, method: Method) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.value == value && r.method == method)
    }

    pub fn rmse_mm(&self, value: f64, method: Method) -> Option<f64> {
        self.row(value, method).map(|r| r.rmse_mm)
    }
}

/// Errors of one epoch: `[method][value]` for the time-gap axis,
/// `[method][0]` otherwise.
type EpochErrors = Vec<Vec<Vec<f64>>>;

fn run_epoch(spec: &SweepSpec, cfg: &ScenarioConfig, seed: u64) -> Result<EpochErrors, EvalError> {
    let (records, truth) = simulate_epoch_seeded(cfg, seed)?;
    let pc = PipelineConfig { theta_form: spec.theta_form, ..PipelineConfig::for_scenario(cfg) };
    let extracted = extract_pairs(&records, &pc)?;
    spec.methods
        .iter()
        .map(|&m| {
            let est = estimate_from_pairs(&records, &extracted, m, &pc)?;
            if spec.axis == Axis::Timegap {
                spec.values.iter().map(|&gap| relative_errors(&est.ranges, &truth, gap)).collect()
            } else {
                Ok(vec![differential_errors(&est.ranges, &truth)?])
            }
        })
        .collect()
}

/// Simulates every (axis value, epoch), estimates with each method and
/// pools the errors. Deterministic for a given spec.
pub fn run_sweep(spec: &SweepSpec) -> Result<Report, EvalError> {
    spec.validate()?;
    let seeds = epoch_seeds(spec.seed, spec.epochs);
    let configs: Vec<ScenarioConfig> = if spec.axis == Axis::Timegap {
        vec![spec.base_scenario.clone()]
    } else {
        spec.values.iter().map(|&v| spec.axis.apply(&spec.base_scenario, v)).collect()
    };
    let jobs: Vec<(usize, u64)> = (0..configs.len()).flat_map(|c| seeds.iter().map(move |&s| (c, s))).collect();
    let results: Vec<EpochErrors> =
        jobs.par_iter().map(|&(c, seed)| run_epoch(spec, &configs[c], seed)).collect::<Result<_, _>>()?;

    let period = wrap_period_m(spec.base_scenario.rotation_modulus, spec.base_scenario.ofdm.fc_hz);
    let mut rows = Vec::new();
    for (vi, &value) in spec.values.iter().enumerate() {
        let (config_idx, slot) = if spec.axis == Axis::Timegap { (0, vi) } else { (vi, 0) };
        for (mi, &method) in spec.methods.iter().enumerate() {
            let pooled: Vec<f64> = results[config_idx * seeds.len()..(config_idx + 1) * seeds.len()]
                .iter()
                .flat_map(|epoch| epoch[mi][slot].iter().copied())
                .collect();
            let histogram =
                (spec.axis == Axis::Timegap).then(|| Histogram::from_errors(&pooled, period, spec.histogram_bins));
            rows.push(ReportRow {
                axis: spec.axis,
                value,
                method,
                rmse_mm: rmse_mm(&pooled).unwrap_or(f64::NAN),
                n: pooled.len(),
                seeds: seeds.clone(),
                histogram,
            });
        }
    }
    Ok(Report { axis: spec.axis, rows })
}

/// Upper end of the steepest rise in `log(rmse)` between adjacent points.
/// `values` must be increasing.
pub fn speed_knee(values: &[f64], rmse: &[f64]) -> Option<f64> {
    if values.len() != rmse.len() || values.len() < 2 || rmse.iter().any(|r| !(*r > 0.0)) {
        return None;
    }
    (1..values.len())
        .map(|i| (values[i], (rmse[i] / rmse[i - 1]).ln()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(v, _)| v)
}

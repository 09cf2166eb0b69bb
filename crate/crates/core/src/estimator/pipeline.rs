//! Full estimation chain over one epoch of records.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    differential_range, differential_range_robust, estimate_symbol_delay, extract_cp, ftm_differential, ftm_range,
    refine_cfo, sum_cp_series, CfoSearch, CfoTrack, CpPair, EstimatorError, RangeSeries, RangeStep, SumCpSeries,
    ThetaForm,
};
use crate::scenario::{MeasurementRecord, Observation, ScenarioConfig};
use crate::waveform::{CsiVector, OfdmConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "sumcp")]
    SumCp,
    #[serde(rename = "sumcp-robust")]
    SumCpRobust,
    #[serde(rename = "ftm")]
    Ftm,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::SumCp, Method::SumCpRobust, Method::Ftm];

    pub fn name(&self) -> &'static str {
        match self {
            Method::SumCp => "sumcp",
            Method::SumCpRobust => "sumcp-robust",
            Method::Ftm => "ftm",
        }
    }
}

impl FromStr for Method {
    type Err = EstimatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sumcp" => Ok(Method::SumCp),
            "sumcp-robust" => Ok(Method::SumCpRobust),
            "ftm" => Ok(Method::Ftm),
            other => Err(EstimatorError::InvalidInput(format!("unknown method {other:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub ofdm: OfdmConfig,
    pub rotation_modulus: u32,
    pub signal_dim: usize,
    pub cfo: CfoSearch,
    pub theta_form: ThetaForm,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            ofdm: OfdmConfig::default(),
            rotation_modulus: 2,
            signal_dim: 3,
            cfo: CfoSearch::default(),
            theta_form: ThetaForm::default(),
        }
    }
}

impl PipelineConfig {
    /// Estimator settings matching a simulated scenario.
    pub fn for_scenario(cfg: &ScenarioConfig) -> Self {
        Self {
            ofdm: cfg.ofdm,
            rotation_modulus: cfg.rotation_modulus,
            cfo: CfoSearch { rotation_modulus: cfg.rotation_modulus, precision_hz: cfg.cfo_precision_hz, ..CfoSearch::default() },
            ..Self::default()
        }
    }
}

/// Per-exchange phases plus the symbol delays they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedPairs {
    pub pairs: Vec<CpPair>,
    /// `(τ̂2, τ̂4)` per exchange; absent for CP-only logs.
    pub delays_s: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochEstimate {
    pub method: Method,
    pub ranges: RangeSeries,
    pub sum_cp: Option<SumCpSeries>,
    pub cfo: Option<CfoTrack>,
}

fn phases(csi: &CsiVector, pc: &PipelineConfig) -> Result<(f64, f64), EstimatorError> {
    let tau = estimate_symbol_delay(csi, pc.signal_dim, &pc.ofdm)?;
    Ok((tau, extract_cp(csi, tau, &pc.ofdm)?))
}

/// Symbol delays and carrier phases for every record. CSI records must all
/// be of the same kind; CP-only records skip delay estimation.
pub fn extract_pairs(records: &[MeasurementRecord], pc: &PipelineConfig) -> Result<ExtractedPairs, EstimatorError> {
    let with_csi = records.iter().filter(|r| matches!(r.observation, Observation::Csi { .. })).count();
    if with_csi != 0 && with_csi != records.len() {
        return Err(EstimatorError::InvalidInput("records mix CSI and CP-only observations".into()));
    }
    let per_record: Vec<(CpPair, Option<(f64, f64)>)> = records
        .par_iter()
        .map(|r| {
            let (psi2, psi4, delays) = match &r.observation {
                Observation::Csi { fwd, bwd } => {
                    let (tau2, psi2) = phases(fwd, pc)?;
                    let (tau4, psi4) = phases(bwd, pc)?;
                    (psi2, psi4, Some((tau2, tau4)))
                }
                Observation::Phases { psi2_rad, psi4_rad } => (*psi2_rad, *psi4_rad, None),
            };
            Ok((
                CpPair {
                    p: r.p,
                    psi2_rad: psi2,
                    psi4_rad: psi4,
                    t1_s: r.t1_s,
                    t4_s: r.t4_s,
                    coarse_cfo_hz: r.coarse_cfo_hz,
                },
                delays,
            ))
        })
        .collect::<Result<_, EstimatorError>>()?;
    let delays_s = if with_csi > 0 { Some(per_record.iter().map(|(_, d)| d.unwrap()).collect()) } else { None };
    Ok(ExtractedPairs { pairs: per_record.into_iter().map(|(p, _)| p).collect(), delays_s })
}

/// Runs `method` on already-extracted phases.
pub fn estimate_from_pairs(
    records: &[MeasurementRecord],
    extracted: &ExtractedPairs,
    method: Method,
    pc: &PipelineConfig,
) -> Result<EpochEstimate, EstimatorError> {
    let pairs = &extracted.pairs;
    if pairs.len() < 2 {
        return Err(EstimatorError::InvalidInput("need at least two exchanges".into()));
    }
    match method {
        Method::Ftm => {
            let delays = extracted
                .delays_s
                .as_ref()
                .ok_or_else(|| EstimatorError::InvalidInput("the FTM baseline needs CSI to estimate symbol delays".into()))?;
            let absolute: Vec<f64> = records
                .iter()
                .zip(delays)
                .map(|(r, &(tau2, tau4))| ftm_range(r, tau2, tau4, pc.ofdm.fc_hz))
                .collect();
            let steps = ftm_differential(&absolute)
                .into_iter()
                .zip(&pairs[1..])
                .map(|(d, pair)| RangeStep { p: pair.p, t1_s: pair.t1_s, dhat_m: d, shat_mps: None, theta_rad: None })
                .collect();
            Ok(EpochEstimate {
                method,
                ranges: RangeSeries { first_p: pairs[0].p, first_t1_s: pairs[0].t1_s, steps },
                sum_cp: None,
                cfo: None,
            })
        }
        Method::SumCp | Method::SumCpRobust => {
            let search = CfoSearch { rotation_modulus: pc.rotation_modulus, ..pc.cfo };
            let track = refine_cfo(pairs, &search)?;
            let series = sum_cp_series(pairs, &track, pc.rotation_modulus)?;
            let ranges = if method == Method::SumCp {
                differential_range(&series, pc.rotation_modulus, pc.ofdm.fc_hz)?
            } else {
                differential_range_robust(&series, pc.rotation_modulus, pc.ofdm.fc_hz, pc.theta_form)?
            };
            Ok(EpochEstimate { method, ranges, sum_cp: Some(series), cfo: Some(track) })
        }
    }
}

/// Full chain for one method.
pub fn estimate_epoch(
    records: &[MeasurementRecord],
    method: Method,
    pc: &PipelineConfig,
) -> Result<EpochEstimate, EstimatorError> {
    let extracted = extract_pairs(records, pc)?;
    estimate_from_pairs(records, &extracted, method, pc)
}

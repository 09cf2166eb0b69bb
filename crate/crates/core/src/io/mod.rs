//! Files: JSONL measurement logs and truth, JSON run/sweep configuration,
//! CSV estimates and reports.
//!
//! Log line schema (one object per line):
//! `{"p", "t1_s", "t2_s", "t3_s", "t4_s", "coarse_cfo_hz", "csi_fwd": [[re, im]; K], "csi_bwd": [[re, im]; K]}`,
//! or with `"psi2_rad"`, `"psi4_rad"` in place of the two CSI arrays.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{EpochEstimate, Method, ThetaForm};
use crate::evaluation::{Report, SweepSpec};
use crate::scenario::{EpochTruth, ExchangeTruth, MeasurementRecord, Observation, ScenarioConfig};
use crate::waveform::CsiVector;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{}:{line}: schema error: {message}", path.display())]
    Schema { path: PathBuf, line: usize, message: String },
    #[error("{}: {message}", path.display())]
    Config { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// Decimal with 15 significant digits.
pub fn fmt_sig(x: f64) -> String {
    format!("{x:.14e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogLine {
    p: usize,
    t1_s: f64,
    t2_s: f64,
    t3_s: f64,
    t4_s: f64,
    coarse_cfo_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    csi_fwd: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    csi_bwd: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    psi2_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    psi4_rad: Option<f64>,
}

fn to_pairs(csi: &CsiVector) -> Vec<[f64; 2]> {
    csi.values().iter().map(|c| [c.re, c.im]).collect()
}

fn from_pairs(v: Vec<[f64; 2]>) -> CsiVector {
    CsiVector::new(v.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
}

impl From<&MeasurementRecord> for LogLine {
    fn from(r: &MeasurementRecord) -> Self {
        let mut line = LogLine {
            p: r.p,
            t1_s: r.t1_s,
            t2_s: r.t2_s,
            t3_s: r.t3_s,
            t4_s: r.t4_s,
            coarse_cfo_hz: r.coarse_cfo_hz,
            csi_fwd: None,
            csi_bwd: None,
            psi2_rad: None,
            psi4_rad: None,
        };
        match &r.observation {
            Observation::Csi { fwd, bwd } => {
                line.csi_fwd = Some(to_pairs(fwd));
                line.csi_bwd = Some(to_pairs(bwd));
            }
            Observation::Phases { psi2_rad, psi4_rad } => {
                line.psi2_rad = Some(*psi2_rad);
                line.psi4_rad = Some(*psi4_rad);
            }
        }
        line
    }
}

impl LogLine {
    fn into_record(self, expected_k: usize) -> Result<MeasurementRecord, String> {
        for (name, v) in [("t1_s", self.t1_s), ("t2_s", self.t2_s), ("t3_s", self.t3_s), ("t4_s", self.t4_s)] {
            if !v.is_finite() {
                return Err(format!("{name} is not finite"));
            }
        }
        if !self.coarse_cfo_hz.is_finite() {
            return Err("coarse_cfo_hz is not finite".into());
        }
        let observation = match (self.csi_fwd, self.csi_bwd, self.psi2_rad, self.psi4_rad) {
            (Some(fwd), Some(bwd), None, None) => {
                for (name, v) in [("csi_fwd", &fwd), ("csi_bwd", &bwd)] {
                    if v.len() != expected_k {
                        return Err(format!("{name} has {} subcarriers, expected {expected_k}", v.len()));
                    }
                    if v.iter().flatten().any(|x| !x.is_finite()) {
                        return Err(format!("{name} has a non-finite entry"));
                    }
                }
                Observation::Csi { fwd: from_pairs(fwd), bwd: from_pairs(bwd) }
            }
            (None, None, Some(psi2_rad), Some(psi4_rad)) => {
                if !(psi2_rad.is_finite() && psi4_rad.is_finite()) {
                    return Err("carrier phases are not finite".into());
                }
                Observation::Phases { psi2_rad, psi4_rad }
            }
            _ => return Err("expected both csi_fwd and csi_bwd, or both psi2_rad and psi4_rad".into()),
        };
        Ok(MeasurementRecord {
            p: self.p,
            t1_s: self.t1_s,
            t2_s: self.t2_s,
            t3_s: self.t3_s,
            t4_s: self.t4_s,
            coarse_cfo_hz: self.coarse_cfo_hz,
            observation,
        })
    }
}

/// Non-blank lines of a text file with their 1-based line numbers.
fn lines(path: &Path) -> Result<Vec<(usize, String)>, IoError> {
    let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

/// Reads a measurement log whose CSI arrays must have `expected_k` entries.
pub fn read_log(path: impl AsRef<Path>, expected_k: usize) -> Result<Vec<MeasurementRecord>, IoError> {
    let path = path.as_ref();
    let mut records = Vec::new();
    let mut first_kind: Option<bool> = None;
    for (line_no, text) in lines(path)? {
        let parsed: LogLine = serde_json::from_str(&text).map_err(|e| IoError::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        let schema = |message: String| IoError::Schema { path: path.to_path_buf(), line: line_no, message };
        let record = parsed.into_record(expected_k).map_err(schema)?;
        let is_csi = matches!(record.observation, Observation::Csi { .. });
        match first_kind {
            None => first_kind = Some(is_csi),
            Some(k) if k != is_csi => return Err(schema("log mixes CSI and carrier-phase lines".into())),
            _ => {}
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_log(records: &[MeasurementRecord], path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for r in records {
        serde_json::to_writer(&mut w, &LogLine::from(r)).map_err(|e| io_err(path)(e.into()))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthHeader {
    sta2_clock_offset_s: f64,
    oscillator_phase_rad: f64,
    exchanges: usize,
}

/// Truth as JSONL: an epoch header line, then one line per exchange.
pub fn write_truth(truth: &EpochTruth, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let header = TruthHeader {
        sta2_clock_offset_s: truth.sta2_clock_offset_s,
        oscillator_phase_rad: truth.oscillator_phase_rad,
        exchanges: truth.len(),
    };
    let mut put = |v: serde_json::Result<String>| -> Result<(), IoError> {
        let s = v.map_err(|e| io_err(path)(e.into()))?;
        writeln!(w, "{s}").map_err(io_err(path))
    };
    put(serde_json::to_string(&header))?;
    for x in &truth.exchanges {
        put(serde_json::to_string(x))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_truth(path: impl AsRef<Path>) -> Result<EpochTruth, IoError> {
    let path = path.as_ref();
    let all = lines(path)?;
    let parse_err = |line: usize, e: serde_json::Error| IoError::Parse { path: path.to_path_buf(), line, message: e.to_string() };
    let Some((header_line, header_text)) = all.first() else {
        return Err(IoError::Schema { path: path.to_path_buf(), line: 1, message: "missing header line".into() });
    };
    let header: TruthHeader = serde_json::from_str(header_text).map_err(|e| parse_err(*header_line, e))?;
    let exchanges = all[1..]
        .iter()
        .map(|(n, t)| serde_json::from_str::<ExchangeTruth>(t).map_err(|e| parse_err(*n, e)))
        .collect::<Result<Vec<_>, _>>()?;
    if exchanges.len() != header.exchanges {
        return Err(IoError::Schema {
            path: path.to_path_buf(),
            line: *header_line,
            message: format!("header announces {} exchanges, file has {}", header.exchanges, exchanges.len()),
        });
    }
    Ok(EpochTruth {
        sta2_clock_offset_s: header.sta2_clock_offset_s,
        oscillator_phase_rad: header.oscillator_phase_rad,
        exchanges,
    })
}

/// Output locations of a run; command-line flags take precedence.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub log_path: Option<PathBuf>,
    pub truth_path: Option<PathBuf>,
    pub estimate_path: Option<PathBuf>,
}

/// Scenario, seed, methods and output paths of a simulate/estimate run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_run_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub theta_form: ThetaForm,
    #[serde(default)]
    pub outputs: OutputPaths,
}

fn default_run_methods() -> Vec<Method> {
    vec![Method::SumCp]
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            seed: None,
            methods: default_run_methods(),
            theta_form: ThetaForm::default(),
            outputs: OutputPaths::default(),
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| IoError::Parse { path: path.to_path_buf(), line: e.line(), message: e.to_string() })
}

/// Parses and validates a run configuration.
pub fn load_run_config(path: impl AsRef<Path>) -> Result<RunConfig, IoError> {
    let path = path.as_ref();
    let cfg: RunConfig = read_json(path)?;
    cfg.scenario
        .validate()
        .map_err(|e| IoError::Config { path: path.to_path_buf(), message: e.to_string() })?;
    Ok(cfg)
}

/// Parses and validates a sweep specification.
pub fn load_sweep_spec(path: impl AsRef<Path>) -> Result<SweepSpec, IoError> {
    let path = path.as_ref();
    let spec: SweepSpec = read_json(path)?;
    spec.validate().map_err(|e| IoError::Config { path: path.to_path_buf(), message: e.to_string() })?;
    Ok(spec)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, IoError> {
    csv::Writer::from_path(path).map_err(|e| io_err(path)(e.into()))
}

fn csv_row<I, S>(w: &mut csv::Writer<File>, path: &Path, row: I) -> Result<(), IoError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| io_err(path)(e.into()))
}

/// `axis,value,method,rmse_mm,n`, one row per (value, method).
pub fn write_report(report: &Report, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    csv_row(&mut w, path, ["axis", "value", "method", "rmse_mm", "n"])?;
    for r in &report.rows {
        csv_row(
            &mut w,
            path,
            [r.axis.name().to_string(), fmt_sig(r.value), r.method.name().to_string(), fmt_sig(r.rmse_mm), r.n.to_string()],
        )?;
    }
    w.flush().map_err(io_err(path))
}

/// Wrapped relative-range error PDFs of a time-gap report:
/// `value,method,bin_center_mm,density_per_mm,mass`.
pub fn write_histograms(report: &Report, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    csv_row(&mut w, path, ["value", "method", "bin_center_mm", "density_per_mm", "mass"])?;
    for r in &report.rows {
        let Some(h) = &r.histogram else { continue };
        for b in 0..h.bins() {
            csv_row(
                &mut w,
                path,
                [
                    fmt_sig(r.value),
                    r.method.name().to_string(),
                    fmt_sig(h.bin_center_m(b) * 1e3),
                    fmt_sig(h.density(b) * 1e-3),
                    fmt_sig(h.mass[b]),
                ],
            )?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// Per-exchange estimates: `method,p,t1_s,dhat_m,rhat_m,shat_mps`, where
/// `rhat_m` is the relative range from the first exchange.
pub fn write_estimates(estimates: &[EpochEstimate], path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    csv_row(&mut w, path, ["method", "p", "t1_s", "dhat_m", "rhat_m", "shat_mps"])?;
    for est in estimates {
        let name = est.method.name();
        let r = &est.ranges;
        csv_row(&mut w, path, [name.to_string(), r.first_p.to_string(), fmt_sig(r.first_t1_s), String::new(), fmt_sig(0.0), String::new()])?;
        let mut rhat = 0.0;
        for s in &r.steps {
            rhat += s.dhat_m;
            csv_row(
                &mut w,
                path,
                [
                    name.to_string(),
                    s.p.to_string(),
                    fmt_sig(s.t1_s),
                    fmt_sig(s.dhat_m),
                    fmt_sig(rhat),
                    s.shat_mps.map(fmt_sig).unwrap_or_default(),
                ],
            )?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// Serializes `f64` with `±inf` as the strings `"inf"` / `"-inf"`.
pub mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" | "+inf" | "Infinity" => Ok(f64::INFINITY),
                "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::custom(format!("expected a number or \"inf\", got {other:?}"))),
            },
        }
    }
}

/// [`extended_f64`] for a list of values.
pub mod extended_f64_seq {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(transparent)]
    struct Ext(#[serde(with = "super::extended_f64")] f64);

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&x| Ext(x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Ext>::deserialize(d)?.into_iter().map(|e| e.0).collect())
    }
}

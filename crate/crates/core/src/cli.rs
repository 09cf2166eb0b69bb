//! Command-line entry points.
//!
//! Exit codes: 0 success, 1 invalid input or failed check, 2 usage error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::estimator::{estimate_from_pairs, extract_pairs, Method, PipelineConfig, ThetaForm};
use crate::evaluation::{differential_errors, rmse_mm, run_sweep, Axis};
use crate::io::{
    load_run_config, load_sweep_spec, read_log, read_truth, write_estimates, write_histograms, write_log,
    write_report, write_truth, RunConfig,
};
use crate::scenario::simulate_epoch_seeded;
use crate::waveform::{oracle_grid, ORACLE_STEPS};
use crate::Error;

/// Phase tolerance of `oracle-check` (rad).
pub const ORACLE_TOLERANCE_RAD: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "carrier-ranging", version, about = "Carrier-phase differential ranging over Wi-Fi frame exchanges")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one epoch and write its measurement log.
    Simulate {
        /// Run configuration (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Measurement log (JSONL).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Ground truth (JSONL).
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Estimate ranges from a measurement log.
    Estimate(EstimateArgs),
    /// Same as `estimate`, for captured logs.
    Replay(EstimateArgs),
    /// Run a parameter sweep and write an RMSE report.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// Report CSV; time-gap sweeps also write `<stem>.pdf.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare closed-form CSI with numerical demodulation.
    OracleCheck {
        #[arg(long, default_value_t = ORACLE_STEPS)]
        steps: usize,
    },
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// May be repeated.
    #[arg(long, required = true, value_parser = parse_method)]
    method: Vec<Method>,
    #[arg(long)]
    out: PathBuf,
    /// Run configuration supplying OFDM and CFO settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print differential-range RMSE against this truth file.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, value_parser = parse_theta)]
    theta_form: Option<ThetaForm>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: crate::estimator::EstimatorError| e.to_string())
}

fn parse_theta(s: &str) -> Result<ThetaForm, String> {
    s.parse().map_err(|e: crate::estimator::EstimatorError| e.to_string())
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Estimator(crate::estimator::EstimatorError::InvalidInput(msg.into()))
}

fn run_config(path: &Option<PathBuf>) -> Result<RunConfig, Error> {
    Ok(match path {
        Some(p) => load_run_config(p)?,
        None => RunConfig::default(),
    })
}

fn simulate(config: Option<PathBuf>, seed: Option<u64>, out: Option<PathBuf>, truth: Option<PathBuf>) -> Result<(), Error> {
    let cfg = run_config(&config)?;
    let seed = seed.or(cfg.seed).ok_or_else(|| invalid("no seed given (--seed or \"seed\" in the config)"))?;
    let out = out.or(cfg.outputs.log_path.clone()).ok_or_else(|| invalid("no output log given (--out)"))?;
    let truth = truth.or(cfg.outputs.truth_path.clone());
    let (records, epoch_truth) = simulate_epoch_seeded(&cfg.scenario, seed)?;
    write_log(&records, &out)?;
    if let Some(t) = truth {
        write_truth(&epoch_truth, &t)?;
    }
    eprintln!("wrote {} exchanges to {}", records.len(), out.display());
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<(), Error> {
    let cfg = run_config(&args.config)?;
    let pc = PipelineConfig {
        theta_form: args.theta_form.unwrap_or(cfg.theta_form),
        ..PipelineConfig::for_scenario(&cfg.scenario)
    };
    let records = read_log(&args.input, pc.ofdm.num_subcarriers)?;
    let extracted = extract_pairs(&records, &pc)?;
    let estimates = args
        .method
        .iter()
        .map(|&m| estimate_from_pairs(&records, &extracted, m, &pc))
        .collect::<Result<Vec<_>, _>>()?;
    write_estimates(&estimates, &args.out)?;
    if let Some(path) = &args.truth {
        let truth = read_truth(path)?;
        for est in &estimates {
            let errors = differential_errors(&est.ranges, &truth)?;
            let rmse = rmse_mm(&errors).unwrap_or(f64::NAN);
            println!("{} rmse_mm={rmse:.6} n={}", est.method, errors.len());
        }
    }
    Ok(())
}

fn sweep(spec: PathBuf, out: PathBuf) -> Result<(), Error> {
    let spec = load_sweep_spec(&spec)?;
    let report = run_sweep(&spec)?;
    write_report(&report, &out)?;
    if report.axis == Axis::Timegap {
        write_histograms(&report, out.with_extension("pdf.csv"))?;
    }
    Ok(())
}

/// Returns whether the grid passes.
fn oracle_check(steps: usize) -> Result<bool, Error> {
    let cases = oracle_grid(&Default::default(), steps)?;
    let max = cases.iter().map(|c| c.max_phase_dev_rad).fold(0.0, f64::max);
    let max_eta0 = cases.iter().filter(|c| c.eta == 0.0).map(|c| c.max_phase_dev_rad).fold(0.0, f64::max);
    for c in &cases {
        println!(
            "{:?} eta={:e} tau_ns={} m={} max_phase_dev_rad={:.6e}",
            c.direction,
            c.eta,
            c.tau_s * 1e9,
            c.symbol_index,
            c.max_phase_dev_rad
        );
    }
    println!("max_phase_dev_rad={max:.6e} (eta=0: {max_eta0:.6e})");
    Ok(max < ORACLE_TOLERANCE_RAD && max_eta0 < 1e-9)
}

/// Parses `argv` (including the program name) and runs the command.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Simulate { config, seed, out, truth } => simulate(config, seed, out, truth),
        Command::Estimate(args) | Command::Replay(args) => estimate(args),
        Command::Sweep { spec, out } => sweep(spec, out),
        Command::OracleCheck { steps } => match oracle_check(steps) {
            Ok(true) => Ok(()),
            Ok(false) => {
                eprintln!("oracle check failed: tolerance {ORACLE_TOLERANCE_RAD} rad");
                return 1;
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

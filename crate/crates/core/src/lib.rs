//! Carrier-phase differential ranging for Wi-Fi frame exchanges.
//!
//! The crate is split along the processing chain:
//!
//! * [`waveform`] synthesizes per-frame CSI for the CP Request (forward) and
//!   CP Response (backward) frames, and carries a numerical OFDM demodulator
//!   used to check the closed forms.
//! * [`scenario`] generates simulated epochs: room geometry, random-waypoint
//!   motion, crystal drift, the nested frame schedule and timestamps.
//! * [`estimator`] turns CSI and timestamps into range estimates: root-MUSIC
//!   symbol-delay estimation, carrier-phase extraction, CFO refinement,
//!   sum-CP, differential/relative range, and the FTM round-trip baseline.
//! * [`evaluation`] computes RMSE and error histograms and runs sweeps.
//! * [`io`] and [`cli`] hold the JSONL log format, configs, CSV reports and
//!   the command-line entry points.

pub mod cli;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod io;
pub mod phase;
pub mod scenario;
pub mod waveform;

pub use error::Error;

/// Speed of light used throughout (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

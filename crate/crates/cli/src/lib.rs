//! Config-driven experiment harness for `mixbag-core`: multi-seed runs,
//! bag-count and bag-size sweeps, and CSV exports for analysis plots.

pub mod config;
pub mod error;
pub mod experiment;
pub mod export;

pub use config::{DatasetSource, ExperimentConfig};
pub use error::{CliError, Result};
pub use experiment::{run_experiment, run_preliminary_sweep, BagPlan, RunResult, SweepMode, SweepPoint};

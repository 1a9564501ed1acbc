//! Experiment harness: parameter sweeps, Pareto aggregation and exports.

pub mod app;
pub mod config;
pub mod error;
pub mod report;
pub mod sweep;

pub use config::{GridPoint, GridSpec, ObjectiveSet, SweepConfig};
pub use error::CliError;
pub use sweep::{run_sweep, RunRecord, SweepOptions};

//! Experiment driver: configuration files, single runs with certificates,
//! parameter sweeps and plot data.

pub mod config;
pub mod experiment;
pub mod plot;

pub use config::{ConfigError, ExperimentConfig, SweepPoint};
pub use experiment::{run_experiment, run_sweep, sweep_rows, ExperimentOutcome, RowStatus, RunError, SweepRow};

//! Experiment harness: configuration, sweeps, data files and tables.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

pub use commands::{run, Report};
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};

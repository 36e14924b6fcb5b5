//! Experiment harness for the `bfmcmc` samplers.
//!
//! [`config`] resolves a TOML file, presets and flag overrides into an
//! [`ExperimentConfig`]; [`run_experiment`] runs the replications and writes
//! traces, density data, summary tables and a [`RunManifest`]; [`report`]
//! rebuilds tables from a finished run.

pub mod config;
pub mod error;
pub mod experiment;
pub mod manifest;
pub mod output;
pub mod report;

pub use config::{Experiment, ExperimentConfig, KernelChoice, Overrides, Preset, RawConfig};
pub use error::{CliError, CliResult};
pub use experiment::run_experiment;
pub use manifest::RunManifest;
pub use output::emit_density_data;
pub use report::report;

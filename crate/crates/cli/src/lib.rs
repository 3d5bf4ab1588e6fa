//! Experiment runner for the moduli flow: config parsing, orchestration and file formats.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, ConfigError, ExperimentConfig, Kind};
pub use run::{run_experiment, RunError, RunOptions};

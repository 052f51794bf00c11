//! Experiment runner for `momentstack`: JSON configuration with flag
//! overrides and CSV output for every table.

pub mod config;
pub mod experiments;

pub use config::{ExperimentConfig, ExperimentId, Stackings, OUT_DIR_ENV};
pub use experiments::{run, run_custom, run_fig1, run_fig2, run_fig3, Table};

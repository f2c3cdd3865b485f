//! Experiment orchestration for the `statsol` command-line tool.

pub mod config;
pub mod experiment;

pub use config::{preset, presets, ExperimentConfig};
pub use experiment::{compare_runs, fit_slope, open_run, run_experiment, RunOptions};

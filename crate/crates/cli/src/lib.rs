//! Configuration parsing, experiment dispatch and artifact output for `euler-lab`.

pub mod config;
pub mod output;
pub mod runner;

pub use config::{parse_config, ExperimentConfig, System};
pub use runner::{dispatch, error_exit_code, exit_code, Outcome, RunSummary};

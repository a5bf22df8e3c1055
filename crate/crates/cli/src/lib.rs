//! Batch driver for the `hyperinv` command: TOML scenario configs, JSON
//! reports with a flat machine section, matrix artifacts and the regression
//! corpus.

pub mod commands;
pub mod config;
pub mod corpus;
pub mod output;
pub mod report;

pub use commands::{run, run_example, ExampleName, ExampleOverrides, Outcome, Status};
pub use config::{ConfigError, Overrides, ScenarioConfig};

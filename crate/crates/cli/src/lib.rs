//! Configuration and orchestration behind the `coopbf` command.

pub mod config;
pub mod pipeline;

pub use config::{parse_config, ConfigError, ExperimentConfig};
pub use pipeline::{execute, synthesize, write_outputs, ExperimentOutput};

//! Configuration, pipelines and artifacts for the `ghz` command-line tool.

pub mod config;
pub mod error;
pub mod fringe;
pub mod pipeline;

pub use config::{Analysis, ExperimentConfig};
pub use error::{CliError, CliResult};
pub use pipeline::{run, run_and_write, ExperimentReport};

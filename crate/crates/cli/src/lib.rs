//! Batch runner for the `dgtau` solver: configuration, pipelines, run
//! artifacts and comparison tables.

pub mod artifacts;
pub mod check;
pub mod compare;
pub mod config;
pub mod error;
pub mod pipeline;

pub use config::{Mode, RunConfig};
pub use error::{CliError, CliResult};

//! Experiment runner for GeNeX: config parsing, seeded end-to-end runs,
//! persisted artifacts and report generation. The `genex` binary is a thin
//! wrapper over [`commands`].

pub mod commands;
pub mod config;
pub mod encode;
pub mod error;
pub mod fsutil;
pub mod pipeline;
pub mod report;

pub use config::{MethodSpec, RunConfig};
pub use error::CliError;

//! Configuration-driven runner for robust pulse optimization: warm-start
//! ladders, verification, sweeps, heatmaps and gradient checks.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

pub use commands::{Context, RunOptions};
pub use config::{RunConfig, TimeUnit};
pub use error::{CliError, CliResult};

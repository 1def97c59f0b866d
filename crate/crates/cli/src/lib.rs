//! Configuration-driven runner for the regulation and tracking experiments.
//!
//! The binary is a thin wrapper over [`runner::run`] and [`runner::check`];
//! both are exposed here so the behavior can be tested without spawning a
//! process.

pub mod config;
pub mod error;
pub mod runner;
pub mod seeds;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::CliError;

//! Config-driven runner for the modeswap simulator.

pub mod config;
pub mod error;
pub mod output;
pub mod runner;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use runner::Command;

//! Configuration parsing and subcommand dispatch for the `heatrm` binary.

pub mod commands;
pub mod config;

pub use commands::{run, Command, Output};
pub use config::{ConfigError, RunConfig};

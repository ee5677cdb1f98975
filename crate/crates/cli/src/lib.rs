//! File formats, configuration and subcommands of the `latdyn` tool.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod format;

pub use error::CliError;

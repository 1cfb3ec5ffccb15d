//! Configuration, checkpoints and subcommands behind the `pin` binary.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;

pub use error::{CliError, Result};

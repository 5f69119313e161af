//! Command-line front end: JSON run configs, report writers and the three
//! subcommands behind the `beliefcal` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use config::{Resolved, RunConfig};
pub use error::CliError;

//! Command-line driver and file formats for `flowvmc-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use error::{CliError, CliResult};

/// Package version plus `git describe` output when built from a checkout.
pub const VERSION: &str = env!("FLOWVMC_VERSION");

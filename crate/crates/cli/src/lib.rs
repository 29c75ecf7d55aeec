//! Command-line driver for the epidemic sampler: data ingestion, run
//! manifests and one entry point per subcommand.

pub mod cli;
pub mod commands;
pub mod error;
pub mod io;
pub mod manifest;

pub use cli::{Cli, Command};
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;

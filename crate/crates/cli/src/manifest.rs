use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cli::Command;
use crate::error::{CliError, CliResult};
use crate::io::{sha256_file, write_json};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to reproduce a run bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// The invocation, with defaults filled in.
    pub command: Command,
    pub seed: Option<u64>,
    /// SHA-256 of the input data file, when there is one.
    pub data_checksum: Option<String>,
    /// Resolved configuration actually used.
    pub config: serde_json::Value,
    pub wall_time_sec: f64,
}

impl RunManifest {
    pub fn new(command: &Command, config: serde_json::Value, wall_time_sec: f64) -> CliResult<Self> {
        let data_checksum = command.data().map(sha256_file).transpose()?;
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.clone(),
            seed: command.seed(),
            data_checksum,
            config,
            wall_time_sec,
        })
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}

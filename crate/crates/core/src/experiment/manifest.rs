//! Run manifest: what a command produced and from which exact inputs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{write_atomic, ExperimentError};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub version: u32,
    pub command: String,
    /// SHA-256 of the serialized config written alongside this manifest.
    pub config_sha256: String,
    pub master_seed: u64,
    pub artifact_version: String,
    pub produced_files: Vec<String>,
    pub wall_clock_s: f64,
    /// Faulted hours within the episode, when applicable.
    pub downtime_hours: Option<usize>,
}

impl RunManifest {
    pub fn new(command: &str, config_toml: &str, master_seed: u64) -> Self {
        Self {
            version: 1,
            command: command.to_string(),
            config_sha256: sha256_hex(config_toml),
            master_seed,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            produced_files: Vec::new(),
            wall_clock_s: 0.0,
            downtime_hours: None,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), ExperimentError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| ExperimentError::Data(e.to_string()))?;
        write_atomic(path, &text)
    }
}

pub fn sha256_hex(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

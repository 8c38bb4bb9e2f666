use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Written next to every artifact a command produces.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the resolved configuration as JSON.
    pub config_digest: String,
    pub seed: u64,
    pub tool_version: String,
    pub output_paths: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: u64, output_paths: Vec<PathBuf>) -> anyhow::Result<Self> {
        let json = serde_json::to_vec(config).context("serializing resolved config")?;
        let digest = Sha256::digest(&json);
        let config_digest = digest.iter().map(|b| format!("{b:02x}")).collect();
        Ok(RunManifest {
            command: command.to_string(),
            config_digest,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            output_paths,
        })
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

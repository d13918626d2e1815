//! Run manifest: every input needed to reproduce a run, written before the
//! first iteration and never touched afterwards.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{DatasetSpec, ResolvedConfig};
use aal_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Software version that produced the run.
    pub version: String,
    /// FNV-1a 64 hash of the canonical resolved config text.
    pub config_hash: String,
    /// Seeds of all runs under this manifest (one per replication).
    pub seeds: Vec<u64>,
    pub dataset: DatasetSpec,
    pub out_dir: String,
}

/// FNV-1a 64-bit, hex-encoded.
pub fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

impl RunManifest {
    pub fn for_config(config: &ResolvedConfig, seeds: Vec<u64>, out_dir: &Path) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: fnv1a_hex(config.to_toml().as_bytes()),
            seeds,
            dataset: config.dataset.clone(),
            out_dir: out_dir.display().to_string(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

pub const MANIFEST_VERSION: u32 = 1;

/// Record written next to the outputs of every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub version: u32,
    pub tool_version: String,
    pub command: String,
    pub config: serde_json::Value,
    /// Input path → sha256.
    pub inputs: BTreeMap<String, String>,
    /// Output path → sha256.
    pub outputs: BTreeMap<String, String>,
    pub wall_clock_secs: f64,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        RunManifest {
            version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            wall_clock_secs: 0.0,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(key(path), fsutil::hash_file(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        self.outputs.insert(key(path), fsutil::hash_file(path)?);
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, fsutil::to_sorted_json(self)?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Option<Self>> {
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Some(serde_json::from_str(&text)?))
    }

    /// Inputs whose current content no longer matches the recorded hash.
    pub fn stale_inputs(&self) -> Vec<PathBuf> {
        self.inputs
            .iter()
            .filter(|(p, h)| fsutil::hash_file(Path::new(p)).map_or(true, |now| &now != *h))
            .map(|(p, _)| PathBuf::from(p))
            .collect()
    }
}

fn key(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}

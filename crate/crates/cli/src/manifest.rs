use std::path::{Path, PathBuf};

use motran_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one invocation, written into the output directory before any
/// long-running work starts. Output paths are relative to that directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment_id: String,
    pub command: String,
    pub seed: u64,
    pub config: String,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: String, inputs: &[PathBuf], outputs: &[&str]) -> Result<Self> {
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(InputDigest {
                    path: p.clone(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(seed.to_le_bytes());
        h.update(config.as_bytes());
        for i in &inputs {
            h.update(i.sha256.as_bytes());
        }
        let id = hex::encode(h.finalize());
        Ok(Self {
            experiment_id: format!("{command}-{}", &id[..12]),
            command: command.to_string(),
            seed,
            config,
            inputs,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let path = out_dir.join(RUN_MANIFEST);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::data(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }
}

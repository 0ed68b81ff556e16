use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Merged options; re-running them reproduces the outputs.
    pub config: Value,
    pub seed: u64,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    pub outputs: Vec<OutputFile>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

pub fn describe(files: &[(String, Vec<u8>)]) -> Vec<OutputFile> {
    files
        .iter()
        .map(|(name, data)| OutputFile {
            file: name.clone(),
            sha256: sha256_hex(data),
            bytes: data.len(),
        })
        .collect()
}

/// Writes every output and then the manifest.
pub fn write_all(dir: &Path, files: &[(String, Vec<u8>)], manifest: &RunManifest) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(CliError::io(format!("creating {}", dir.display())))?;
    for (name, data) in files {
        let p = dir.join(name);
        fs::write(&p, data).map_err(CliError::io(format!("writing {}", p.display())))?;
    }
    let mut text = serde_json::to_vec_pretty(manifest).map_err(|e| CliError::Failed(e.to_string()))?;
    text.push(b'\n');
    let p = dir.join(MANIFEST_FILE);
    fs::write(&p, text).map_err(CliError::io(format!("writing {}", p.display())))
}

pub fn read(path: &Path) -> CliResult<RunManifest> {
    let text = fs::read_to_string(path).map_err(CliError::io(format!("reading {}", path.display())))?;
    crate::opts::from_value(
        "manifest",
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("manifest: {e}")))?,
    )
}

//! Run manifests: what was run, on which inputs, producing which outputs.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Settings;
use crate::error::{Error, Result};
use crate::io::write_atomic;

/// A file and its SHA-256 digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(Self { path: path.to_path_buf(), sha256: sha256_hex(&bytes) })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Effective configuration; feeding it back as the config file with the
    /// same inputs reproduces every output.
    pub config: Settings,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: Option<f64>,
    pub exit_status: Option<i32>,
}

impl RunManifest {
    pub fn start(command: &str, config: &Settings, inputs: &[&Path]) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            seed: config.seed(),
            inputs: inputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_>>()?,
            outputs: Vec::new(),
            started: unix_now(),
            finished: None,
            exit_status: None,
        })
    }

    /// Write `bytes` atomically and record the output.
    pub fn emit(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_atomic(path, bytes)?;
        self.outputs.push(FileDigest { path: path.to_path_buf(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    /// Stamp the finish time and write the manifest as JSON.
    pub fn finish(&mut self, path: &Path, exit_status: i32) -> Result<()> {
        self.finished = Some(unix_now());
        self.exit_status = Some(exit_status);
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        write_atomic(path, json.as_bytes())
    }
}

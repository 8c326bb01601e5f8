//! Atomic file output and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn unix_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Input(format!("{}: {e}", path.display()));
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Input(format!("{}: not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

#[derive(Serialize)]
pub struct RunManifest {
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rng_seeds: Vec<u64>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub files: Vec<String>,
}

/// Collects the files of one command and writes them into a directory.
pub struct OutputSet {
    dir: PathBuf,
    command: String,
    config_sha256: String,
    started: f64,
    files: Vec<String>,
    pub seeds: Vec<u64>,
}

impl OutputSet {
    pub fn new(dir: &Path, command: &str, config_bytes: &[u8]) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config_sha256: sha256_hex(config_bytes),
            started: unix_seconds(),
            files: Vec::new(),
            seeds: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, contents.as_bytes())?;
        self.files.push(name.to_string());
        Ok(path)
    }

    pub fn finish(self) -> Result<(), CliError> {
        let manifest = RunManifest {
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config_sha256: self.config_sha256,
            rng_seeds: self.seeds,
            started_unix: self.started,
            finished_unix: unix_seconds(),
            files: self.files,
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        text.push('\n');
        write_atomic(&self.dir.join("manifest.json"), text.as_bytes())
    }
}

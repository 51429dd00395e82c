//! Output directory that records a hash for every file it writes, and the
//! run manifest built from those records.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

impl FileHash {
    pub fn of(path: String, bytes: &[u8]) -> Self {
        Self {
            path,
            sha256: sha256_hex(bytes),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything needed to rerun a command and check its outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Resolved settings after merging flags, config file and defaults.
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<FileHash>,
    /// Paths relative to the output directory.
    pub outputs: Vec<FileHash>,
    pub tool_version: String,
    pub elapsed_seconds: f64,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub struct OutDir {
    root: PathBuf,
    written: Vec<FileHash>,
    started: Instant,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::output(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::output(&path, e))?;
        self.written.push(FileHash::of(name.to_string(), bytes));
        Ok(())
    }

    /// Writes `manifest.json` and returns the manifest.
    pub fn finish<S: Serialize>(self, command: &str, settings: &S, seed: u64, inputs: Vec<FileHash>) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: command.to_string(),
            config: serde_json::to_value(settings).expect("settings serialize to JSON"),
            seed,
            inputs,
            outputs: self.written,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            elapsed_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = self.root.join(MANIFEST_FILE);
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        bytes.push(b'\n');
        std::fs::write(&path, bytes).map_err(|e| CliError::output(&path, e))?;
        Ok(manifest)
    }
}

/// Renders rows to CSV bytes.
pub fn csv_bytes<I, R>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

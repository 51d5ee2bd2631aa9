//! Run manifests: what was computed, with which settings, and checksums of
//! every file written.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub config: Value,
    pub backend: String,
    pub tolerances: Value,
    pub duration_seconds: f64,
    pub files: Vec<FileEntry>,
    pub summary: Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects output files for one run and writes the manifest last, so a
/// manifest exists only when every output did get written.
pub struct RunWriter {
    dir: PathBuf,
    command: String,
    started: Instant,
    files: Vec<FileEntry>,
}

impl RunWriter {
    pub fn create(dir: &Path, command: &str) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        // a manifest from an earlier run must not vouch for this one
        let stale = dir.join(MANIFEST_NAME);
        if stale.exists() {
            fs::remove_file(&stale).map_err(|e| CliError::io(&stale, e))?;
        }
        Ok(Self { dir: dir.to_path_buf(), command: command.to_string(), started: Instant::now(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.push(FileEntry {
            name: name.to_string(),
            bytes: contents.len() as u64,
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(path)
    }

    pub fn finish(self, config: Value, backend: &str, tolerances: Value, summary: Value) -> CliResult<RunManifest> {
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            command: self.command,
            config,
            backend: backend.to_string(),
            tolerances,
            duration_seconds: self.started.elapsed().as_secs_f64(),
            files: self.files,
            summary,
        };
        let path = self.dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

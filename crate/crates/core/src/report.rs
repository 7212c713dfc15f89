//! Artifact writers, checksums and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const TOOL_NAME: &str = "stdiff";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Stable identifier of a run: a prefix of `sha256(config || seed)`.
pub fn run_id(config_json: &str, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(config_json.as_bytes());
    h.update(seed.to_le_bytes());
    hex::encode(h.finalize())[..16].to_string()
}

/// CSV bytes with a header row.
pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
    pub wall_clock_secs: f64,
    pub threads: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision_bits: Option<u32>,
    pub artifacts: Vec<Artifact>,
}

/// Writes artifacts into one directory and records their checksums.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl ArtifactWriter {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, artifacts: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn artifacts(&self) -> &[Artifact] {
        &self.artifacts
    }

    pub fn bytes(&mut self, name: &str, data: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, data)?;
        self.artifacts.retain(|a| a.file != name);
        self.artifacts.push(Artifact { file: name.to_string(), sha256: sha256_hex(data), bytes: data.len() as u64 });
        Ok(path)
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<PathBuf> {
        let data = csv_bytes(rows)?;
        self.bytes(name, &data)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let data = json_bytes(value)?;
        self.bytes(name, &data)
    }

    /// Writes `manifest.json`, which is not listed among its own artifacts.
    pub fn finish(self, mut manifest: RunManifest) -> Result<RunManifest> {
        manifest.artifacts = self.artifacts;
        let data = json_bytes(&manifest)?;
        fs::write(self.dir.join("manifest.json"), data)?;
        Ok(manifest)
    }
}

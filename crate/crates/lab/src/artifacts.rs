//! Run directories: every artifact is hashed as it is written and the run
//! manifest records the resolved configuration next to those hashes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, LabResult};
use crate::fieldio::csv_err;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub master_seed: Option<u64>,
    /// The configuration after merging file, flags and defaults.
    pub config: serde_json::Value,
    pub artifacts: Vec<ArtifactRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub struct RunDir {
    root: PathBuf,
    artifacts: Vec<ArtifactRecord>,
}

impl RunDir {
    pub fn create(root: &Path) -> LabResult<Self> {
        fs::create_dir_all(root).map_err(|e| LabError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn artifacts(&self) -> &[ArtifactRecord] {
        &self.artifacts
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> LabResult<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| LabError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| LabError::io(&path, e))?;
        self.artifacts.push(ArtifactRecord {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> LabResult<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| LabError::format(self.root.join(rel), e.to_string()))?;
        bytes.push(b'\n');
        self.write_bytes(rel, &bytes)
    }

    pub fn write_csv<T: Serialize>(&mut self, rel: &str, rows: &[T]) -> LabResult<PathBuf> {
        let bytes = csv_bytes(rows)?;
        self.write_bytes(rel, &bytes)
    }

    /// Writes `manifest.json`; call once all artifacts are in place.
    pub fn finish(self, command: &str, master_seed: Option<u64>, config: serde_json::Value) -> LabResult<RunManifest> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            master_seed,
            config,
            artifacts: self.artifacts,
        };
        let path = self.root.join(MANIFEST);
        let mut bytes = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| LabError::format(&path, e.to_string()))?;
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(|e| LabError::io(&path, e))?;
        Ok(manifest)
    }
}

pub fn csv_bytes<T: Serialize>(rows: &[T]) -> LabResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| LabError::format("<csv>", e.to_string()))
}

pub fn read_manifest(dir: &Path) -> LabResult<RunManifest> {
    let path = dir.join(MANIFEST);
    let bytes = fs::read(&path).map_err(|e| LabError::io(&path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| LabError::format(&path, e.to_string()))
}

/// Paths whose current hash differs from the manifest (or that are missing).
pub fn verify_manifest(dir: &Path, manifest: &RunManifest) -> Vec<String> {
    manifest
        .artifacts
        .iter()
        .filter(|a| match fs::read(dir.join(&a.path)) {
            Ok(bytes) => sha256_hex(&bytes) != a.sha256,
            Err(_) => true,
        })
        .map(|a| a.path.clone())
        .collect()
}

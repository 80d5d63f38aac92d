//! Artifact writing and run manifests.
//!
//! A manifest records the fully resolved configuration (defaults filled in,
//! referenced profiles inlined) and the SHA-256 of every artifact, so a run
//! can be replayed from the manifest alone and its outputs compared byte by
//! byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{load_json, RunConfig};
use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn text(name: &str, text: String) -> Self {
        Artifact {
            name: name.into(),
            bytes: text.into_bytes(),
        }
    }

    pub fn binary(name: &str, bytes: Vec<u8>) -> Self {
        Artifact {
            name: name.into(),
            bytes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub run: RunConfig,
    /// Input files the run read, with their hashes at the time.
    #[serde(default)]
    pub inputs: Vec<ArtifactRecord>,
    pub artifacts: Vec<ArtifactRecord>,
    pub exit_code: i32,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn record(name: &str, bytes: &[u8]) -> ArtifactRecord {
    ArtifactRecord {
        path: name.into(),
        sha256: sha256_hex(bytes),
        bytes: bytes.len() as u64,
    }
}

fn io_err(action: &'static str, path: &Path) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.to_path_buf();
    move |source| CliError::Io {
        action,
        path,
        source,
    }
}

/// Write artifacts into `dir` followed by the manifest describing them.
pub fn write_run(
    dir: &Path,
    run: &RunConfig,
    inputs: &[(PathBuf, Vec<u8>)],
    artifacts: &[Artifact],
    exit_code: i32,
) -> Result<Manifest, CliError> {
    fs::create_dir_all(dir).map_err(io_err("create", dir))?;
    for a in artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.bytes).map_err(io_err("write", &path))?;
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        run: run.clone(),
        inputs: inputs
            .iter()
            .map(|(p, b)| record(&p.display().to_string(), b))
            .collect(),
        artifacts: artifacts.iter().map(|a| record(&a.name, &a.bytes)).collect(),
        exit_code,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    let path = dir.join(MANIFEST_NAME);
    fs::write(&path, text).map_err(io_err("write", &path))?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<Manifest, CliError> {
    load_json(path)
}

/// Artifacts listed in `manifest` whose files in `dir` no longer match.
pub fn verify_artifacts(dir: &Path, manifest: &Manifest) -> Result<Vec<String>, CliError> {
    let mut mismatched = Vec::new();
    for a in &manifest.artifacts {
        let path = dir.join(&a.path);
        let bytes = fs::read(&path).map_err(io_err("read", &path))?;
        if sha256_hex(&bytes) != a.sha256 {
            mismatched.push(a.path.clone());
        }
    }
    Ok(mismatched)
}

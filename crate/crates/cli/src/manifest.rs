//! Run manifests: every command that writes outputs also records the exact
//! command line, resolved configuration digest, seeds, input digests, and
//! output paths needed to reproduce the run.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;

#[derive(Debug, Clone, Serialize)]
pub struct InputMeta {
    pub path: String,
    pub sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub n_groups: usize,
    pub group_ids: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub artifact_version: String,
    /// SHA-256 over the resolved config and every input digest.
    pub config_digest: String,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provider_model: Option<String>,
    pub inputs: Vec<InputMeta>,
    pub outputs: Vec<String>,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

pub fn now_unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    to_hex(hasher.finalize().as_slice())
}

fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest covering the resolved configuration and all input file digests.
pub fn config_digest(config: &Config, inputs: &[InputMeta]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(config).expect("config serializes"));
    for input in inputs {
        hasher.update(input.sha256.as_bytes());
    }
    to_hex(hasher.finalize().as_slice())
}

/// Where the manifest for an output lives: `<dir>/run_manifest.json` for a
/// directory output, `<stem>.manifest.json` next to a file output.
pub fn manifest_path(output: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        output.join("run_manifest.json")
    } else {
        output.with_extension("manifest.json")
    }
}

pub fn write_manifest(manifest: &RunManifest, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes") + "\n";
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

//! Metadata sidecars: every artifact `x` gets `x.meta.json` holding the
//! code version, the effective configuration and its hash.

use std::path::{Path, PathBuf};

use graphprobe::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamp {
    pub code_version: String,
    pub artifact: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

pub fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Hash of a JSON value in its canonical (key-sorted, compact) rendering,
/// salted with the code version.
pub fn config_hash(config: &serde_json::Value) -> String {
    let text = format!("{CODE_VERSION}\n{config}");
    hex_sha256(text.as_bytes())
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex_sha256(&bytes))
}

pub fn sidecar_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

impl Stamp {
    pub fn new(artifact: &str, config: serde_json::Value) -> Self {
        Stamp {
            code_version: CODE_VERSION.to_owned(),
            artifact: artifact.to_owned(),
            config_hash: config_hash(&config),
            config,
            extra: serde_json::Value::Null,
        }
    }

    pub fn with_extra(mut self, extra: serde_json::Value) -> Self {
        self.extra = extra;
        self
    }

    pub fn write_for(&self, artifact: &Path) -> Result<()> {
        let path = sidecar_path(artifact);
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// The sidecar next to `artifact`, if both exist and parse.
    pub fn read_for(artifact: &Path) -> Option<Stamp> {
        if !artifact.exists() {
            return None;
        }
        let text = std::fs::read_to_string(sidecar_path(artifact)).ok()?;
        serde_json::from_str(&text).ok()
    }
}

//! Every CLI run drops a manifest next to its outputs: the tool version,
//! the subcommand, and the fully-resolved config. No timestamps or host
//! details, so reruns with the same inputs are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config: serde_json::Value,
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>, config: serde_json::Value) -> Self {
        Self {
            tool: "oim",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed,
            config,
        }
    }
}

/// Writes `manifest.json` into `out_dir` and returns its path.
pub fn write_manifest(out_dir: impl AsRef<Path>, manifest: &Manifest) -> std::io::Result<PathBuf> {
    let path = out_dir.as_ref().join("manifest.json");
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

//! Run manifests: every command records its configuration hash, grid, and
//! outputs so acceptance experiments are reproducible.

use serde::Serialize;
use std::path::Path;

/// FNV-1a over the raw config text; stable across platforms.
pub fn config_hash(text: &str) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in text.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

#[derive(Serialize)]
pub struct Manifest<T: Serialize> {
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
    pub results: T,
}

pub fn write_manifest<T: Serialize>(path: &Path, manifest: &Manifest<T>) -> anyhow::Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(file, manifest)?;
    Ok(())
}

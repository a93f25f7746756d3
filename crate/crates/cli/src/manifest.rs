use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Failure;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// One per run, written last into the output directory.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub master_seed: Option<u64>,
    pub derived_seeds: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub details: serde_json::Value,
    pub wall_time_secs: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn digest_file(path: &Path, shown: String) -> Result<FileDigest, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::io(path, e))?;
    Ok(FileDigest {
        path: shown,
        sha256: sha256_hex(&bytes),
    })
}

/// Digests of an input path: the file itself, or every file of a directory
/// in name order.
pub fn digest_inputs(paths: &[PathBuf]) -> Result<Vec<FileDigest>, Failure> {
    let mut out = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| Failure::io(path, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            entries.sort();
            for entry in entries {
                out.push(digest_file(&entry, entry.display().to_string())?);
            }
        } else if path.exists() {
            out.push(digest_file(path, path.display().to_string())?);
        }
    }
    Ok(out)
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, master_seed: Option<u64>) -> Self {
        let config_hash = sha256_hex(config.to_string().as_bytes());
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            config,
            config_hash,
            master_seed,
            derived_seeds: serde_json::Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
            details: serde_json::Value::Null,
            wall_time_secs: 0.0,
        }
    }

    /// Records the outputs (paths relative to `out_dir`) and writes the manifest.
    pub fn finish(mut self, out_dir: &Path, outputs: &[PathBuf], elapsed: Duration) -> Result<PathBuf, Failure> {
        let mut sorted = outputs.to_vec();
        sorted.sort();
        sorted.dedup();
        self.outputs = sorted
            .iter()
            .map(|p| {
                let shown = p.strip_prefix(out_dir).unwrap_or(p).display().to_string();
                digest_file(p, shown)
            })
            .collect::<Result<_, _>>()?;
        self.wall_time_secs = elapsed.as_secs_f64();
        let path = out_dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(&self).map_err(|e| Failure::Core(e.into()))? + "\n";
        fs::write(&path, text).map_err(|e| Failure::io(&path, e))?;
        Ok(path)
    }
}

//! Run manifests: a deterministic JSON inventory of every produced file
//! with content digests, written last so a complete manifest implies a
//! complete run. Timing logs are listed but never hashed; they are the one
//! output allowed to differ between runs with equal seeds.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const TIMING_FILE: &str = "timing.csv";

#[derive(Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chains: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataInfo>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
    /// Relative path to content sha256, every output except timing logs.
    pub files: BTreeMap<String, String>,
    /// Wall-clock logs, excluded from `files` by design.
    pub timing_files: Vec<String>,
}

#[derive(Serialize)]
pub struct DataInfo {
    pub path: String,
    pub sha256: String,
    pub dims: usize,
    pub samples: usize,
}

impl Manifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            chains: None,
            data: None,
            params: BTreeMap::new(),
            files: BTreeMap::new(),
            timing_files: Vec::new(),
        }
    }

    /// Hash every regular file under `root` (recursively) into the
    /// manifest, then write it as `manifest.json` at `root`.
    pub fn write(mut self, root: &Path) -> Result<()> {
        let mut rel_paths = Vec::new();
        collect_files(root, root, &mut rel_paths)?;
        rel_paths.sort();
        for rel in rel_paths {
            if rel == "manifest.json" {
                continue;
            }
            if rel.ends_with(TIMING_FILE) {
                self.timing_files.push(rel);
                continue;
            }
            let digest = sha256_file(&root.join(&rel))?;
            self.files.insert(rel, digest);
        }
        let json = serde_json::to_string_pretty(&self).context("encoding manifest")?;
        fs::write(root.join("manifest.json"), json + "\n").context("writing manifest")?;
        Ok(())
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path
                .strip_prefix(root)
                .expect("path under root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            out.push(rel);
        }
    }
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

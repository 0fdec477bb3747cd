//! Per-run record of inputs, outputs and settings, written next to each command's main output.

use std::fs;
use std::path::{Path, PathBuf};

use kgx_core::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Formats {
    pub graph_bundle: u32,
    pub checkpoint: u32,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub formats: Formats,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub threads: usize,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Wall-clock time of the run; the only field expected to differ between reruns.
    pub timestamp: String,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn digests(paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.clone(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

/// `<path>.run.json` (or `<dir>/run.json` for directories).
pub fn manifest_path(primary: &Path) -> PathBuf {
    if primary.is_dir() {
        primary.join("run.json")
    } else {
        let mut s = primary.as_os_str().to_owned();
        s.push(".run.json");
        PathBuf::from(s)
    }
}

pub struct RunRecorder {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl RunRecorder {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        RunRecorder {
            command: command.to_string(),
            config,
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn write(self, primary: &Path) -> Result<PathBuf> {
        let manifest = RunManifest {
            tool: "kgx",
            tool_version: env!("CARGO_PKG_VERSION"),
            formats: Formats {
                graph_bundle: kgx_core::kgraph::BUNDLE_VERSION,
                checkpoint: kgx_core::model::CHECKPOINT_VERSION,
            },
            command: self.command,
            config: self.config,
            seed: self.seed,
            threads: rayon::current_num_threads(),
            inputs: digests(&self.inputs)?,
            outputs: digests(&self.outputs)?,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        };
        let path = manifest_path(primary);
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

//! Run manifests: every command emits exactly one, recording the resolved
//! config, the seed, and SHA-256 hashes of all input and output artifacts.

use crate::error::CliError;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config: &'a serde_json::Value,
    seed: u64,
    inputs: &'a BTreeMap<String, String>,
    outputs: &'a BTreeMap<String, String>,
    duration_ms: u128,
}

pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    seed: u64,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    start: Instant,
    anchor: Option<PathBuf>,
}

fn hash_file(path: &Path) -> Result<String, CliError> {
    let data = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&data)))
}

impl ManifestBuilder {
    pub fn new(command: &str) -> ManifestBuilder {
        ManifestBuilder {
            command: command.to_string(),
            config: serde_json::Value::Null,
            seed: 0,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            start: Instant::now(),
            anchor: None,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    /// Records the fully resolved configuration of the command.
    pub fn set_config(&mut self, config: serde_json::Value) {
        self.config = config;
    }

    pub fn record_input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs
            .insert(path.display().to_string(), hash_file(path)?);
        Ok(())
    }

    /// Records an output file hash; the first recorded output anchors the
    /// default manifest location.
    pub fn record_output(&mut self, path: &Path) -> Result<(), CliError> {
        if self.anchor.is_none() {
            self.anchor = Some(path.to_path_buf());
        }
        self.outputs
            .insert(path.display().to_string(), hash_file(path)?);
        Ok(())
    }

    /// Writes the manifest to `explicit`, or next to the first output, or to
    /// `semalign-manifest.json` in the working directory.
    pub fn write(self, explicit: Option<&Path>) -> Result<PathBuf, CliError> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => match &self.anchor {
                Some(a) => PathBuf::from(format!("{}.manifest.json", a.display())),
                None => PathBuf::from("semalign-manifest.json"),
            },
        };
        let manifest = RunManifest {
            command: &self.command,
            config: &self.config,
            seed: self.seed,
            inputs: &self.inputs,
            outputs: &self.outputs,
            duration_ms: self.start.elapsed().as_millis(),
        };
        let body = serde_json::to_string_pretty(&manifest)
            .expect("manifest serialization cannot fail");
        std::fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

//! Run manifests: what went in, what came out, and how.
//!
//! Everything except `wall_time_seconds` is a pure function of the effective
//! config and the input bytes, so two runs with the same inputs differ only in
//! that one field.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{KglError, Result};

pub const MANIFEST_PREFIX: &str = "manifest_";

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = crate::io::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| KglError::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub tokenizer_version: &'static str,
    pub command: String,
    pub config_digest: String,
    pub effective_config: serde_json::Value,
    /// Input path as configured, to SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Output file name, relative to the output directory, to SHA-256.
    pub outputs: BTreeMap<String, String>,
    /// Command-specific metadata (thresholds, seeds, fitted hyperparameters...).
    pub details: serde_json::Value,
    pub wall_time_seconds: f64,
}

/// Collects inputs and outputs while a command runs.
pub struct Recorder {
    command: String,
    started: Instant,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    details: serde_json::Map<String, serde_json::Value>,
}

impl Recorder {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            started: Instant::now(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            details: serde_json::Map::new(),
        }
    }

    /// Records an input file digest under its configured (unresolved) name.
    pub fn input(&mut self, cfg: &RunConfig, configured: &Path) -> Result<()> {
        let digest = sha256_file(&cfg.resolve(configured))?;
        self.inputs.insert(configured.display().to_string(), digest);
        Ok(())
    }

    /// Digest of a previously recorded input.
    pub fn digest_of(&self, configured: &Path) -> Option<String> {
        self.inputs.get(&configured.display().to_string()).cloned()
    }

    /// Notes an output file written into the output directory.
    pub fn output(&mut self, name: &str) {
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details.insert(
            key.to_string(),
            serde_json::to_value(value).expect("details serialize"),
        );
    }

    /// Hashes outputs and writes `manifest_<command>.json` into the output directory.
    pub fn finish(self, cfg: &RunConfig) -> Result<Manifest> {
        let dir = cfg.output_dir();
        let effective = serde_json::to_value(cfg).expect("config serializes");
        let canonical = serde_json::to_vec(&effective).expect("json");
        let mut outputs = BTreeMap::new();
        for name in &self.outputs {
            outputs.insert(name.clone(), sha256_file(&dir.join(name))?);
        }
        let manifest = Manifest {
            tool: "kgl",
            version: env!("CARGO_PKG_VERSION"),
            tokenizer_version: kgl_core::TOKENIZER_VERSION,
            command: self.command.clone(),
            config_digest: sha256_bytes(&canonical),
            effective_config: effective,
            inputs: self.inputs,
            outputs,
            details: serde_json::Value::Object(self.details),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = dir.join(format!("{MANIFEST_PREFIX}{}.json", self.command));
        let mut text = serde_json::to_string_pretty(&manifest).expect("json");
        text.push('\n');
        crate::io::write_text(&path, &text)?;
        Ok(manifest)
    }
}

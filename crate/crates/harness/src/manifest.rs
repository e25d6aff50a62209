use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ResolvedConfig;
use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a command: the resolved config, the master
/// seed and digests of the input files. Output paths are relative to the
/// output directory so that reruns elsewhere compare equal.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub seed: u64,
    pub config: ResolvedConfig,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, seed: u64) -> Self {
        Self {
            tool: "bmv",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            seed,
            config: ResolvedConfig::default(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Reads an input file as text and records its digest.
    pub fn read_input(&mut self, role: &str, path: &Path) -> Result<String> {
        let bytes = std::fs::read(path)
            .map_err(|e| HarnessError::new(crate::error::ErrorKind::Io, format!("{}: {e}", path.display())))?;
        self.inputs.push(InputDigest {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        String::from_utf8(bytes).map_err(|_| HarnessError::config(format!("{} is not UTF-8 text", path.display())))
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::InputArgs;

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to re-run a command: resolved flags, input digests,
/// seeds, and the tool version.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub inputs: Vec<InputDigest>,
    pub seeds: Vec<u64>,
    pub config: serde_json::Value,
}

fn digest(path: &Path) -> Result<InputDigest> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let hash = Sha256::digest(&bytes);
    Ok(InputDigest {
        path: path.to_path_buf(),
        sha256: hash.iter().map(|b| format!("{b:02x}")).collect(),
    })
}

impl Manifest {
    pub fn new(
        command: &'static str,
        input: &InputArgs,
        config: &impl Serialize,
        seeds: Vec<u64>,
    ) -> Result<Self> {
        let mut inputs = vec![digest(&input.input)?];
        if let Some(labels) = &input.labels {
            inputs.push(digest(labels)?);
        }
        Ok(Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            inputs,
            seeds,
            config: serde_json::to_value(config)?,
        })
    }

    /// The manifest as a single `# `-prefixed JSON comment line.
    pub fn csv_header(&self) -> Result<String> {
        Ok(format!("# {}\n", serde_json::to_string(self)?))
    }
}

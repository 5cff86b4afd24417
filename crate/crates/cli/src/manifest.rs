use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance record written next to every output artifact.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub seed: u64,
    pub tool_versions: BTreeMap<&'static str, &'static str>,
    pub timestamp_unix: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(argv: &[String], config: &impl Serialize, inputs: &[&Path], seed: u64) -> io::Result<Self> {
        let config = serde_json::to_vec(config).map_err(io::Error::other)?;
        let mut digests = BTreeMap::new();
        for path in inputs {
            digests.insert(path.display().to_string(), sha256_hex(&std::fs::read(path)?));
        }
        Ok(RunManifest {
            command_line: argv.to_vec(),
            config_hash: sha256_hex(&config),
            inputs: digests,
            seed,
            tool_versions: BTreeMap::from([("costa", env!("CARGO_PKG_VERSION"))]),
            timestamp_unix: timestamp(),
        })
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        std::fs::write(path, text + "\n")
    }
}

// SOURCE_DATE_EPOCH pins the stamp for reproducible artifacts.
fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()))
}

/// `dir/<stem>.<suffix>` for an output at `dir/<stem>.<ext>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.{suffix}"))
}

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Read an input file, mapping failures to data errors.
pub fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| CliError::Internal(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

/// `path` with `suffix` appended to the file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of(path: &Path, bytes: &[u8]) -> Self {
        FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        }
    }
}

/// Record of one command invocation and every file it read or wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub generator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub vocab_hash: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model_hash: Option<String>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub warnings: usize,
    pub started_unix: u64,
    pub finished_unix: u64,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            seed: None,
            generator: None,
            vocab_hash: None,
            model_hash: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            warnings: 0,
            started_unix: unix_now(),
            finished_unix: 0,
        }
    }

    /// Write an output atomically and record its digest.
    pub fn output(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(path, bytes)?;
        self.outputs.push(FileDigest::of(path, bytes));
        Ok(())
    }

    /// Stamp the finish time and write the manifest next to `primary`.
    pub fn finish(mut self, primary: &Path) -> Result<PathBuf, CliError> {
        self.finished_unix = unix_now();
        let path = sibling(primary, ".manifest.json");
        let mut text = serde_json::to_string_pretty(&self).map_err(|e| CliError::Internal(e.to_string()))?;
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_and_digest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        write_atomic(&p, b"abc").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"abc");
        assert_eq!(
            FileDigest::of(&p, b"abc").sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(sibling(&p, ".manifest.json"), dir.path().join("x.txt.manifest.json"));
    }
}

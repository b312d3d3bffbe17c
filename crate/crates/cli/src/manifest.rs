//! Run manifest and atomic file output.
//!
//! Every subcommand writes `manifest.json` describing the run completely:
//! the resolved configuration (defaults filled in), the flags, the seeds and
//! kernel settings, content hashes of inputs and outputs, the tool and
//! source-tree version, and per-phase timings. Re-running the same tool
//! version with the recorded configuration and inputs reproduces the output
//! files byte for byte; the hashes make drift detectable.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct FileStamp {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// `git describe` of the source tree, or "unknown" outside a checkout.
    pub source: String,
    pub subcommand: String,
    pub created_unix_secs: u64,
    pub config_path: Option<String>,
    pub config_sha256: Option<String>,
    /// The configuration actually used, with every default filled in.
    pub resolved_config: Config,
    /// Subcommand flags as given (defaults included).
    pub flags: BTreeMap<String, String>,
    pub threads: usize,
    pub inputs: Vec<FileStamp>,
    pub outputs: Vec<FileStamp>,
    pub timings_ms: BTreeMap<String, u128>,
}

impl Manifest {
    pub fn new(subcommand: &str, config: Config) -> Self {
        Self {
            tool: "arcchoice".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            source: git_describe(),
            subcommand: subcommand.into(),
            created_unix_secs: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            config_path: None,
            config_sha256: None,
            resolved_config: config,
            flags: BTreeMap::new(),
            threads: 0,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn record_config_source(&mut self, path: &Path, bytes: &[u8]) {
        self.config_path = Some(path.display().to_string());
        self.config_sha256 = Some(sha256_hex(bytes));
    }

    pub fn flag(&mut self, name: &str, value: impl ToString) {
        self.flags.insert(name.into(), value.to_string());
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.push(stamp(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), CliError> {
        self.outputs.push(stamp(path)?);
        Ok(())
    }

    /// Records the elapsed time of a phase started at `t`.
    pub fn timing(&mut self, name: &str, t: Instant) {
        self.timings_ms.insert(name.into(), t.elapsed().as_millis());
    }

    pub fn finish(self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join("manifest.json");
        let mut json = serde_json::to_vec_pretty(&self)
            .map_err(|e| CliError::Io(format!("manifest serialization failed: {e}")))?;
        json.push(b'\n');
        write_atomic(&path, &json)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn stamp(path: &Path) -> Result<FileStamp, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    Ok(FileStamp {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--tags", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

/// Writes through a temporary file in the destination directory and renames
/// into place, so readers never observe partial files.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).map(Path::to_path_buf);
    let dir = dir.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)
        .map_err(|e| CliError::Io(format!("cannot create temp file in {}: {e}", dir.display())))?;
    std::io::Write::write_all(&mut tmp, bytes)
        .map_err(|e| CliError::Io(format!("write failed: {e}")))?;
    tmp.persist(path).map_err(|e| CliError::Io(format!("cannot persist {}: {e}", path.display())))?;
    Ok(())
}

/// Serializes to pretty JSON, writes atomically, and records the output
/// stamp in the manifest.
pub fn emit_json<T: Serialize>(
    manifest: &mut Manifest,
    dir: &Path,
    name: &str,
    value: &T,
) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut json = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Io(format!("{name} serialization failed: {e}")))?;
    json.push(b'\n');
    write_atomic(&path, &json)?;
    manifest.outputs.push(stamp(&path)?);
    Ok(path)
}

/// Writes CSV text atomically and records the output stamp.
pub fn emit_csv(
    manifest: &mut Manifest,
    dir: &Path,
    name: &str,
    text: &str,
) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    write_atomic(&path, text.as_bytes())?;
    manifest.outputs.push(stamp(&path)?);
    Ok(path)
}

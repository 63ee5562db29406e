//! JSON files for signals, recovery results and reports.
//!
//! Signal schema (complex numbers are `[re, im]` pairs):
//!
//! ```json
//! {
//!   "nodes": [[0.6, 0.8], ...],
//!   "amplitudes": [[1.0, 0.0], ...],
//!   "config": {"n": 3, "partition": [[0, 1], [2]], "delta": 0.01, "tau": 1.5,
//!              "bigT": 1.7, "eta": 1.0000000000000002, "ell_star": 2},
//!   "amp_lo": 0.5,
//!   "amp_hi": 1.5
//! }
//! ```
//!
//! `partition` holds 0-based node indices.

use std::fs;
use std::path::Path;

use anyhow::Context;
use prony_core::backward::BackwardErrorReport;
use prony_core::model::Signal;
use prony_core::recovery::{Method, RecoveryResult};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable value");
    out.push(b'\n');
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    write_bytes(path, &to_json_bytes(value))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Reads a signal and checks every invariant.
pub fn read_signal(path: &Path) -> anyhow::Result<Signal> {
    let s: Signal = read_json(path)?;
    s.validate()?;
    Ok(s)
}

/// Output of `prony recover`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub method: Method,
    pub epsilon: f64,
    pub seed: u64,
    pub omega: f64,
    pub result: RecoveryResult,
    /// Present for classical runs.
    pub backward: Option<BackwardErrorReport>,
}

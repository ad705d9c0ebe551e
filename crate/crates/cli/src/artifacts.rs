//! On-disk formats: schedule files, checkpoints, summaries and tables.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tnqc_core::model::{PulseSchedule, Task};
use tnqc_core::optimizer::{IterationRecord, LadderCell};

use crate::config::TimeUnit;
use crate::error::{CliError, CliResult};

/// Git-style content hash: SHA-256 over `"blob <len>\0"` followed by the
/// content, as in git's SHA-256 object format.
pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex::encode(h.finalize())
}

pub fn schedule_hash(s: &PulseSchedule) -> String {
    blob_hash(&serde_json::to_vec(s).expect("schedules always serialize"))
}

/// An optimized schedule with what it was optimized for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub task: Task,
    pub n: usize,
    pub delta_j: f64,
    pub time_unit: TimeUnit,
    pub problem_fingerprint: String,
    pub config_fingerprint: String,
    pub schedule_hash: String,
    pub schedule: PulseSchedule,
}

impl ScheduleFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let f: ScheduleFile = read_json(path)?;
        if schedule_hash(&f.schedule) != f.schedule_hash {
            return Err(CliError::Config(format!("{}: schedule content does not match its recorded hash", path.display())));
        }
        Ok(f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config_fingerprint: String,
    pub cells: Vec<LadderCell>,
}

/// Verification-ensemble statistics for one schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub delta_j: f64,
    pub m: usize,
    pub seed: u64,
    pub mean_infidelity: f64,
    pub std_error: f64,
    /// Means over the first and second halves of the ensemble.
    pub half_means: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_gate_infidelity: Option<f64>,
    pub max_discarded_weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n: usize,
    pub delta_j: f64,
    pub seed_source: String,
    pub flagged: bool,
    pub termination: String,
    pub iterations: usize,
    pub optimization_m: usize,
    pub optimization_seed: u64,
    pub optimization_infidelity: f64,
    pub verification: VerificationRecord,
    pub schedule_file: PathBuf,
    pub schedule_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub command: String,
    pub task: Task,
    pub config_fingerprint: String,
    pub seed: u64,
    pub cells: Vec<CellSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub task: Task,
    pub n: usize,
    #[serde(rename = "deltaJ")]
    pub delta_j: f64,
    pub robust: bool,
    #[serde(rename = "meanInfidelity")]
    pub mean_infidelity: f64,
    #[serde(rename = "stdError")]
    pub std_error: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: u64,
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
}

/// Writes through a temporary file so an interrupted run never leaves a
/// half-written file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        ensure_dir(dir)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::io(path, e))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = toml::to_string(value).map_err(|e| CliError::io(path, e))?;
    write_atomic(path, text.as_bytes())
}

pub fn write_history(path: &Path, history: &[IterationRecord]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iter", "value", "grad_norm", "step", "evaluations"]).map_err(|e| CliError::io(path, e))?;
    for r in history {
        w.write_record([r.iter.to_string(), r.value.to_string(), r.grad_norm.to_string(), r.step.to_string(), r.evaluations.to_string()])
            .map_err(|e| CliError::io(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(path, e))?;
    write_atomic(path, &bytes)
}

pub fn sweep_csv(rows: &[SweepRow]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Config(format!("sweep table: {e}")))?;
    }
    w.into_inner().map_err(|e| CliError::Config(format!("sweep table: {e}")))
}

/// Amplitude matrix with `#` header lines, one row per qubit.
pub fn heatmap_csv(header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    for line in header {
        writeln!(out, "# {line}").expect("writing to memory");
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| CliError::Config(format!("heatmap: {e}")))?;
    }
    w.into_inner().map_err(|e| CliError::Config(format!("heatmap: {e}")))
}

/// `schedules/n004_dj0.0500.json` style names.
pub fn cell_stem(n: usize, delta_j: f64) -> String {
    format!("n{n:03}_dj{delta_j:.4}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git_sha256_objects() {
        // `printf 'hello\n' | git hash-object --object-format=sha256 --stdin`
        assert_eq!(blob_hash(b"hello\n"), "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4");
    }

    #[test]
    fn heatmap_layout() {
        let bytes = heatmap_csv(&["units: test".into()], vec![vec![1.0, 2.0], vec![0.5, 0.0]].into_iter()).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), "# units: test\n1,2\n0.5,0\n");
    }
}

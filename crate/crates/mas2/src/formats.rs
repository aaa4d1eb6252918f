//! Line-delimited record files and their schema checks.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use mas2_core::cto::PreferenceTuple;
use mas2_core::loss::LogProbRecord;
use mas2_core::Money;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::executor::TrajectoryOutcome;

pub const TRAJ_SCHEMA_VERSION: u32 = 1;
pub const PREFS_SCHEMA_VERSION: u32 = 1;
pub const LOGPROB_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: line {line}: schema version {found} is not supported (expected {expected})")]
    SchemaMismatch { path: String, line: usize, found: u32, expected: u32 },
    #[error("{path}: line {line}: {message}")]
    Malformed { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    IoFailure { path: String, source: io::Error },
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> FormatError + '_ {
    move |source| FormatError::IoFailure { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub schema_version: u32,
    pub task_id: String,
    #[serde(default)]
    pub domain: Option<String>,
    pub trajectory_id: String,
    /// Generator and implementer spend attributed to this trajectory's task.
    #[serde(default)]
    pub meta_cost: Money,
    /// Absent when the task failed before execution; `error` says why.
    pub outcome: Option<TrajectoryOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub schema_version: u32,
    #[serde(flatten)]
    pub tuple: PreferenceTuple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogProbLine {
    pub schema_version: u32,
    #[serde(flatten)]
    pub record: LogProbRecord,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

/// Serializes one record per line.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), FormatError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(path))?;
    }
    let mut out = io::BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| FormatError::Malformed { path: path.display().to_string(), line: 0, message: e.to_string() })?;
        writeln!(out, "{line}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

/// Reads records, checking each line's schema version first. Blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path, expected: u32) -> Result<Vec<T>, FormatError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let p = path.display().to_string();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |e: serde_json::Error| FormatError::Malformed { path: p.clone(), line: i + 1, message: e.to_string() };
        let probe: VersionProbe = serde_json::from_str(&line).map_err(malformed)?;
        if probe.schema_version != expected {
            return Err(FormatError::SchemaMismatch { path: p, line: i + 1, found: probe.schema_version, expected });
        }
        out.push(serde_json::from_str(&line).map_err(malformed)?);
    }
    Ok(out)
}

pub fn export_preferences(tuples: &[PreferenceTuple], path: &Path) -> Result<(), FormatError> {
    let records: Vec<PreferenceRecord> = tuples.iter().map(|t| PreferenceRecord { schema_version: PREFS_SCHEMA_VERSION, tuple: t.clone() }).collect();
    write_jsonl(path, &records)
}

pub fn import_preferences(path: &Path) -> Result<Vec<PreferenceTuple>, FormatError> {
    Ok(read_jsonl::<PreferenceRecord>(path, PREFS_SCHEMA_VERSION)?.into_iter().map(|r| r.tuple).collect())
}

pub fn write_logprobs(records: &[LogProbRecord], path: &Path) -> Result<(), FormatError> {
    let lines: Vec<LogProbLine> = records.iter().map(|r| LogProbLine { schema_version: LOGPROB_SCHEMA_VERSION, record: r.clone() }).collect();
    write_jsonl(path, &lines)
}

pub fn read_logprobs(path: &Path) -> Result<Vec<LogProbRecord>, FormatError> {
    Ok(read_jsonl::<LogProbLine>(path, LOGPROB_SCHEMA_VERSION)?.into_iter().map(|l| l.record).collect())
}

pub fn read_trajectories(path: &Path) -> Result<Vec<TrajectoryRecord>, FormatError> {
    read_jsonl(path, TRAJ_SCHEMA_VERSION)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(path))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| FormatError::Malformed { path: path.display().to_string(), line: 0, message: e.to_string() })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use mas2_core::cto::DecisionRole;

    fn tuple(i: usize) -> PreferenceTuple {
        PreferenceTuple {
            tuple_id: format!("t/0/{i}>{}", i + 1),
            tree_id: "t".into(),
            role: DecisionRole::Generator,
            node: 0,
            win_node: i,
            lose_node: i + 1,
            context: "line one\nline \"two\"".into(),
            action_win: "a".into(),
            action_lose: "b".into(),
            delta_v: 0.1 + i as f64 / 3.0,
        }
    }

    #[test]
    fn preferences_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.prefs.jsonl");
        let tuples: Vec<_> = (0..3).map(tuple).collect();
        export_preferences(&tuples, &path).unwrap();
        assert_eq!(import_preferences(&path).unwrap(), tuples);
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().all(|l| l.contains("\"schema_version\":1") && l.contains("\"role\":\"generator\"")));
    }

    #[test]
    fn future_schema_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.prefs.jsonl");
        export_preferences(&[tuple(0)], &path).unwrap();
        let text = fs::read_to_string(&path).unwrap().replace("\"schema_version\":1", "\"schema_version\":2");
        fs::write(&path, text).unwrap();
        assert!(matches!(import_preferences(&path), Err(FormatError::SchemaMismatch { found: 2, .. })));
        assert!(matches!(import_preferences(&dir.path().join("missing")), Err(FormatError::IoFailure { .. })));
    }
}

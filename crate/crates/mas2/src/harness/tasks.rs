use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::executor::Judge;

/// One benchmark task: `{id, query, judge}` plus optional extras.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: String,
    pub query: String,
    pub judge: Judge,
    /// search, research, code or math.
    #[serde(default)]
    pub domain: Option<String>,
    /// Python checks the Test operator runs against candidate code.
    #[serde(default)]
    pub checks: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: line {line}: {message}")]
    Invalid { path: String, line: usize, message: String },
}

pub fn parse_tasks(text: &str, path: &str) -> Result<Vec<TaskRecord>, TaskError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let invalid = |message: String| TaskError::Invalid { path: path.into(), line: i + 1, message };
        let task: TaskRecord = serde_json::from_str(line).map_err(|e| invalid(e.to_string()))?;
        task.judge.check().map_err(invalid)?;
        if task.id.is_empty() || !seen.insert(task.id.clone()) {
            return Err(invalid(format!("task id `{}` is empty or repeated", task.id)));
        }
        out.push(task);
    }
    Ok(out)
}

pub fn load_tasks(path: &Path) -> Result<Vec<TaskRecord>, TaskError> {
    let text = std::fs::read_to_string(path).map_err(|e| TaskError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_tasks(&text, &path.display().to_string())
}

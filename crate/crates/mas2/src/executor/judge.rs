use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::operators::Sandbox;

/// Decides R_p(τ) for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Judge {
    /// Case-insensitive, whitespace-collapsed equality.
    ExactMatch { reference: String },
    /// The answer, or the last number in it, lies within `tolerance` of `reference`.
    NumericTolerance {
        reference: f64,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    /// The normalized reference occurs inside the normalized answer.
    Containment { reference: String },
    /// Runs `argv`; exit code 0 means correct. The answer is written to a
    /// file whose path replaces `{answer_file}` in the arguments and is also
    /// exported as `MAS2_ANSWER_FILE`.
    Command {
        argv: Vec<String>,
        #[serde(default)]
        cwd: Option<PathBuf>,
    },
}

fn default_tolerance() -> f64 {
    1e-6
}

pub const ANSWER_FILE_ARG: &str = "{answer_file}";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[error("judge command could not run: {detail}")]
pub struct JudgeCommandFailure {
    pub detail: String,
}

impl Judge {
    pub fn check(&self) -> Result<(), String> {
        match self {
            Judge::NumericTolerance { reference, tolerance } if !reference.is_finite() || !(*tolerance >= 0.0) => {
                Err("numeric judge needs a finite reference and a non-negative tolerance".into())
            }
            Judge::Command { argv, .. } if argv.is_empty() => Err("command judge needs a program".into()),
            _ => Ok(()),
        }
    }
}

pub fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// The whole answer as a number, else the last number-looking token in it.
pub fn extract_number(answer: &str) -> Option<f64> {
    let trimmed = answer.trim().trim_end_matches('.');
    if let Ok(v) = trimmed.replace(',', "").parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    let mut last = None;
    let bytes = answer.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let starts = bytes[i].is_ascii_digit() || (bytes[i] == b'-' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit));
        if !starts {
            i += 1;
            continue;
        }
        let start = i;
        i += 1;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b',' || (bytes[i] == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit))) {
            i += 1;
        }
        if let Ok(v) = answer[start..i].replace(',', "").parse::<f64>() {
            last = Some(v);
        }
    }
    last
}

pub fn evaluate_judge(judge: &Judge, answer: &str, sandbox: &Sandbox) -> Result<bool, JudgeCommandFailure> {
    Ok(match judge {
        Judge::ExactMatch { reference } => normalize(answer) == normalize(reference),
        Judge::NumericTolerance { reference, tolerance } => extract_number(answer).is_some_and(|v| (v - reference).abs() <= *tolerance),
        Judge::Containment { reference } => normalize(answer).contains(&normalize(reference)),
        Judge::Command { argv, cwd } => {
            let fail = |detail: String| JudgeCommandFailure { detail };
            let dir = tempfile::tempdir().map_err(|e| fail(e.to_string()))?;
            let file = dir.path().join("answer.txt");
            std::fs::write(&file, answer).map_err(|e| fail(e.to_string()))?;
            let path = file.to_string_lossy().into_owned();
            let args: Vec<String> = argv[1..].iter().map(|a| a.replace(ANSWER_FILE_ARG, &path)).collect();
            let args: Vec<&str> = args.iter().map(String::as_str).collect();
            let cwd = cwd.as_deref().unwrap_or(dir.path());
            let run = sandbox.run(&argv[0], &args, cwd, &[("MAS2_ANSWER_FILE", &path)]).map_err(|e| fail(format!("{}: {e}", argv[0])))?;
            if run.timed_out {
                return Err(fail(format!("timed out after {} s", sandbox.timeout.as_secs())));
            }
            run.exit_code == Some(0)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_judges() {
        let sb = Sandbox::default();
        assert!(evaluate_judge(&Judge::ExactMatch { reference: "paris".into() }, "Paris ", &sb).unwrap());
        assert!(!evaluate_judge(&Judge::ExactMatch { reference: "paris".into() }, "Paris, France", &sb).unwrap());
        assert!(evaluate_judge(&Judge::Containment { reference: "Barack  Obama".into() }, "It was barack obama.", &sb).unwrap());
    }

    #[test]
    fn numeric() {
        let sb = Sandbox::default();
        let pi = Judge::NumericTolerance { reference: std::f64::consts::PI, tolerance: 1e-3 };
        assert!(evaluate_judge(&pi, "3.1416", &sb).unwrap());
        assert!(!evaluate_judge(&pi, "3.15", &sb).unwrap());
        assert_eq!(extract_number("so the total is 1,234.5 apples"), Some(1234.5));
        assert_eq!(extract_number("x = -7."), Some(-7.0));
        assert_eq!(extract_number("between 3 and 10, pick 4"), Some(4.0));
        assert_eq!(extract_number("none"), None);
    }

    #[test]
    fn command() {
        let sb = Sandbox::default();
        let grep = |pat: &str| Judge::Command { argv: vec!["grep".into(), "-q".into(), pat.into(), ANSWER_FILE_ARG.into()], cwd: None };
        assert!(evaluate_judge(&grep("def add"), "def add(a, b): return a + b", &sb).unwrap());
        assert!(!evaluate_judge(&grep("def sub"), "def add(a, b): return a + b", &sb).unwrap());
        let missing = Judge::Command { argv: vec!["/nonexistent/judge".into()], cwd: None };
        assert!(evaluate_judge(&missing, "x", &sb).is_err());
    }
}

use std::io::{self, Read};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

/// Runs untrusted snippets in a subprocess with a cleared environment, a
/// scratch working directory and a wall-clock limit.
#[derive(Debug, Clone)]
pub struct Sandbox {
    pub python: String,
    pub timeout: Duration,
}

impl Default for Sandbox {
    fn default() -> Self {
        Sandbox { python: "python3".into(), timeout: Duration::from_secs(10) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SandboxRun {
    pub exit_code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
    pub timed_out: bool,
}

impl SandboxRun {
    pub fn passed(&self) -> bool {
        !self.timed_out && self.exit_code == Some(0)
    }

    pub fn summary(&self) -> String {
        let status = if self.timed_out {
            "timed out".to_string()
        } else {
            match self.exit_code {
                Some(c) => format!("exit {c}"),
                None => "killed".into(),
            }
        };
        let mut s = format!("sandbox: {status}");
        for (name, text) in [("stdout", &self.stdout), ("stderr", &self.stderr)] {
            let t = text.trim();
            if !t.is_empty() {
                let tail: String = t.chars().rev().take(1500).collect::<Vec<_>>().into_iter().rev().collect();
                s.push_str(&format!("\n{name}:\n{tail}"));
            }
        }
        s
    }
}

impl Sandbox {
    pub fn run_python(&self, code: &str) -> io::Result<SandboxRun> {
        let dir = tempfile::tempdir()?;
        let file = dir.path().join("main.py");
        std::fs::write(&file, code)?;
        self.run(&self.python, &[file.to_string_lossy().as_ref()], dir.path(), &[])
    }

    /// Spawn `program args` in `cwd` with only `env` set (plus a minimal PATH).
    pub fn run(&self, program: &str, args: &[&str], cwd: &std::path::Path, env: &[(&str, &str)]) -> io::Result<SandboxRun> {
        let mut cmd = Command::new(program);
        cmd.args(args)
            .current_dir(cwd)
            .env_clear()
            .env("PATH", "/usr/local/bin:/usr/bin:/bin")
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        for (k, v) in env {
            cmd.env(k, v);
        }
        let mut child = cmd.spawn()?;
        let mut out = child.stdout.take().expect("piped stdout");
        let mut err = child.stderr.take().expect("piped stderr");
        let out_reader = thread::spawn(move || {
            let mut s = Vec::new();
            let _ = out.read_to_end(&mut s);
            s
        });
        let err_reader = thread::spawn(move || {
            let mut s = Vec::new();
            let _ = err.read_to_end(&mut s);
            s
        });
        let start = Instant::now();
        let mut timed_out = false;
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break Some(status);
            }
            if start.elapsed() >= self.timeout {
                let _ = child.kill();
                let _ = child.wait();
                timed_out = true;
                break None;
            }
            thread::sleep(Duration::from_millis(5));
        };
        let stdout = String::from_utf8_lossy(&out_reader.join().unwrap_or_default()).into_owned();
        let stderr = String::from_utf8_lossy(&err_reader.join().unwrap_or_default()).into_owned();
        Ok(SandboxRun { exit_code: status.and_then(|s| s.code()), stdout, stderr, timed_out })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn has_python() -> bool {
        Command::new("python3").arg("-c").arg("pass").status().is_ok_and(|s| s.success())
    }

    #[test]
    fn exit_codes_and_timeout() {
        if !has_python() {
            return;
        }
        let sb = Sandbox::default();
        let ok = sb.run_python("print('hi')").unwrap();
        assert!(ok.passed());
        assert_eq!(ok.stdout.trim(), "hi");
        let bad = sb.run_python("import sys\nsys.exit(3)").unwrap();
        assert_eq!(bad.exit_code, Some(3));
        let env = sb.run_python("import os\nassert 'HOME' not in os.environ").unwrap();
        assert!(env.passed(), "{}", env.summary());
        let slow = Sandbox { timeout: Duration::from_millis(200), ..Sandbox::default() }.run_python("while True: pass").unwrap();
        assert!(slow.timed_out);
    }
}

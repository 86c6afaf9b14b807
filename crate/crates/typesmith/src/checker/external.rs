//! Adapter for external command-line checkers (mypy, pyre, ...).
//!
//! The command template runs through `sh -c` with `{file}` substituted by a
//! private copy of the candidate source; stdout and stderr lines are matched
//! against a diagnostic pattern with a `line` capture group. The number of
//! missing annotations is still computed by our own extraction, so the
//! external tool only contributes error lines.

use std::io::Read;
use std::process::{Command, Stdio};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use regex::Regex;

use super::{CheckError, Checker, CheckerReport};

pub const DEFAULT_DIAGNOSTIC_REGEX: &str = r"^(?P<file>[^:]+):(?P<line>\d+):.*\berror\b";

/// Caps the number of concurrently running external processes.
struct Gate {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Gate {
            permits: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) {
        let mut p = self.permits.lock().unwrap();
        while *p == 0 {
            p = self.cv.wait(p).unwrap();
        }
        *p -= 1;
    }

    fn release(&self) {
        *self.permits.lock().unwrap() += 1;
        self.cv.notify_one();
    }
}

pub struct ExternalChecker {
    command_template: String,
    pattern: Regex,
    timeout: Duration,
    gate: Arc<Gate>,
}

impl ExternalChecker {
    /// `command_template` must contain a `{file}` placeholder.
    pub fn new(
        command_template: &str,
        diagnostic_regex: &str,
        timeout_s: u64,
        max_concurrent: usize,
    ) -> Result<Self, CheckError> {
        if !command_template.contains("{file}") {
            return Err(CheckError::Crash(
                "command template has no {file} placeholder".to_string(),
            ));
        }
        let pattern = Regex::new(diagnostic_regex)
            .map_err(|e| CheckError::Crash(format!("bad diagnostic regex: {e}")))?;
        if !pattern.capture_names().any(|n| n == Some("line")) {
            return Err(CheckError::Crash(
                "diagnostic regex has no `line` capture group".to_string(),
            ));
        }
        Ok(ExternalChecker {
            command_template: command_template.to_string(),
            pattern,
            timeout: Duration::from_secs(timeout_s),
            gate: Arc::new(Gate::new(max_concurrent)),
        })
    }

    fn run_command(&self, file: &std::path::Path) -> Result<String, CheckError> {
        let cmd = self
            .command_template
            .replace("{file}", &file.display().to_string());
        self.gate.acquire();
        let result = self.run_with_timeout(&cmd);
        self.gate.release();
        result
    }

    fn run_with_timeout(&self, cmd: &str) -> Result<String, CheckError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| CheckError::Crash(format!("cannot spawn checker: {e}")))?;

        let mut stdout = child.stdout.take().expect("stdout piped");
        let mut stderr = child.stderr.take().expect("stderr piped");
        let out_thread = std::thread::spawn(move || {
            let mut buf = String::new();
            let _ = stdout.read_to_string(&mut buf);
            buf
        });
        let err_thread = std::thread::spawn(move || {
            let mut buf = String::new();
            let _ = stderr.read_to_string(&mut buf);
            buf
        });

        let deadline = Instant::now() + self.timeout;
        loop {
            match child.try_wait() {
                Ok(Some(_status)) => break,
                Ok(None) => {
                    if Instant::now() >= deadline {
                        let _ = child.kill();
                        let _ = child.wait();
                        return Err(CheckError::Timeout(self.timeout.as_secs()));
                    }
                    std::thread::sleep(Duration::from_millis(10));
                }
                Err(e) => return Err(CheckError::Crash(format!("wait failed: {e}"))),
            }
        }
        let mut output = out_thread.join().unwrap_or_default();
        output.push('\n');
        output.push_str(&err_thread.join().unwrap_or_default());
        Ok(output)
    }
}

impl Checker for ExternalChecker {
    fn check(&self, source: &str) -> Result<CheckerReport, CheckError> {
        // n_missing from extraction; a parse failure is the usual sentinel.
        let records = crate::extract::extract_functions(source, "<candidate>").map_err(|e| {
            match e {
                crate::extract::ExtractError::Parse { line, message, .. } => {
                    CheckError::Parse { line, message }
                }
                other => CheckError::Crash(other.to_string()),
            }
        })?;
        let n_missing = super::count_missing(&records);

        let dir = tempfile::tempdir()
            .map_err(|e| CheckError::Crash(format!("cannot create temp dir: {e}")))?;
        let file = dir.path().join("candidate.py");
        std::fs::write(&file, source)
            .map_err(|e| CheckError::Crash(format!("cannot write candidate: {e}")))?;

        let output = self.run_command(&file)?;
        let mut error_lines = Vec::new();
        for line in output.lines() {
            if let Some(caps) = self.pattern.captures(line) {
                if let Some(m) = caps.name("line") {
                    if let Ok(n) = m.as_str().parse::<u32>() {
                        error_lines.push(n);
                    }
                }
            }
        }
        error_lines.sort_unstable();
        Ok(CheckerReport {
            n_missing,
            error_lines,
            checker_id: self.id().to_string(),
        })
    }

    fn id(&self) -> &str {
        "external"
    }
}

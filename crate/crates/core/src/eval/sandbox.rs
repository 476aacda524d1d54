//! Child-process execution of candidate code against unit tests.
//!
//! Each run gets a fresh scratch directory holding `candidate.py`, `tests.json`
//! and `runner.py`. The interpreter runs isolated (`-I -S -B`), with an empty
//! environment, the scratch directory as working directory, and an audit hook
//! that aborts on network access, process spawning, or writes outside scratch.
//! The hook is a cooperative guard for benchmark hygiene, not a security boundary.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use super::EvalError;
use crate::task::TestSuite;

const RUNNER: &str = include_str!("../../assets/sandbox/runner.py");

/// Sentinel line printed by the runner when every test passed.
pub const PASS_SENTINEL: &str = "ALL_TESTS_PASSED";
pub const DEFAULT_TIME_LIMIT_MS: u64 = 10_000;
const VIOLATION_PREFIX: &str = "@@ISOLATION_VIOLATION ";
const VIOLATION_EXIT: i32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub name: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeRunResult {
    pub tests: Vec<TestOutcome>,
    pub timed_out: bool,
    pub runtime_ms: u64,
    pub exit_code: Option<i32>,
    pub sentinel_seen: bool,
    pub isolation_violation: Option<String>,
    /// Captured stdout and stderr, truncated.
    pub diagnostics: String,
}

impl CodeRunResult {
    /// Overall verdict: exited cleanly with the sentinel, no timeout, no
    /// violation, and every test passed.
    pub fn passed(&self) -> bool {
        !self.timed_out
            && self.isolation_violation.is_none()
            && self.exit_code == Some(0)
            && self.sentinel_seen
            && !self.tests.is_empty()
            && self.tests.iter().all(|t| t.passed)
    }
}

#[derive(Debug, Default)]
struct Slots {
    in_use: Mutex<usize>,
    freed: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.in_use.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

/// Runs candidates with at most `process_cap` concurrent child processes.
#[derive(Debug, Clone)]
pub struct Sandbox {
    interpreter: String,
    max_output_bytes: usize,
    process_cap: usize,
    slots: Arc<Slots>,
}

impl Default for Sandbox {
    fn default() -> Self {
        Self::new("python3")
    }
}

impl Sandbox {
    pub fn new(interpreter: impl Into<String>) -> Self {
        Self {
            interpreter: interpreter.into(),
            max_output_bytes: 64 * 1024,
            process_cap: std::thread::available_parallelism().map_or(4, |n| n.get()),
            slots: Arc::default(),
        }
    }

    pub fn with_process_cap(mut self, cap: usize) -> Self {
        self.process_cap = cap.max(1);
        self
    }

    pub fn with_max_output(mut self, bytes: usize) -> Self {
        self.max_output_bytes = bytes;
        self
    }

    pub fn interpreter(&self) -> &str {
        &self.interpreter
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut in_use = self.slots.in_use.lock().unwrap();
        while *in_use >= self.process_cap {
            in_use = self.slots.freed.wait(in_use).unwrap();
        }
        *in_use += 1;
        SlotGuard(&self.slots)
    }

    fn resolve_interpreter(&self) -> Result<PathBuf, EvalError> {
        let missing = || EvalError::InterpreterMissing(self.interpreter.clone());
        if self.interpreter.contains('/') {
            let p = PathBuf::from(&self.interpreter);
            return if p.is_file() { Ok(p) } else { Err(missing()) };
        }
        let path = std::env::var_os("PATH").ok_or_else(missing)?;
        std::env::split_paths(&path)
            .map(|dir| dir.join(&self.interpreter))
            .find(|p| p.is_file())
            .ok_or_else(missing)
    }

    pub fn run_code_tests(
        &self,
        candidate: &str,
        tests: &TestSuite,
        time_limit_ms: u64,
    ) -> Result<CodeRunResult, EvalError> {
        if candidate.trim().is_empty() {
            return Err(EvalError::EmptyCandidate);
        }
        if time_limit_ms == 0 {
            return Err(EvalError::InvalidTimeLimit);
        }
        let interpreter = self.resolve_interpreter()?;
        let scratch = tempfile::Builder::new().prefix("inot-sandbox-").tempdir()?;
        write_scratch(scratch.path(), candidate, tests)?;

        let _slot = self.acquire();
        let started = Instant::now();
        let mut child = Command::new(&interpreter)
            .args(["-I", "-S", "-B", "runner.py"])
            .current_dir(scratch.path())
            .env_clear()
            .env("HOME", scratch.path())
            .env("TMPDIR", scratch.path())
            .env("PYTHONHASHSEED", "0")
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => EvalError::InterpreterMissing(self.interpreter.clone()),
                _ => EvalError::Scratch(e),
            })?;

        let stdout = capture(child.stdout.take().expect("piped stdout"), self.max_output_bytes);
        let stderr = capture(child.stderr.take().expect("piped stderr"), self.max_output_bytes);

        let limit = Duration::from_millis(time_limit_ms);
        let (timed_out, exit_code) = match child.wait_timeout(limit)? {
            Some(status) => (false, status.code()),
            None => {
                let _ = child.kill();
                let _ = child.wait();
                (true, None)
            }
        };
        let runtime_ms = started.elapsed().as_millis() as u64;
        let stdout = stdout.join().unwrap_or_default();
        let stderr = stderr.join().unwrap_or_default();

        Ok(interpret(tests, &stdout, &stderr, exit_code, timed_out, runtime_ms))
    }
}

fn write_scratch(dir: &Path, candidate: &str, tests: &TestSuite) -> Result<(), EvalError> {
    std::fs::write(dir.join("candidate.py"), candidate)?;
    let spec = serde_json::json!({ "setup": tests.setup, "cases": tests.cases });
    std::fs::write(dir.join("tests.json"), serde_json::to_vec(&spec).expect("serializable"))?;
    std::fs::write(dir.join("runner.py"), RUNNER)?;
    Ok(())
}

/// Drains `reader` on a thread, keeping at most `cap` bytes.
fn capture(mut reader: impl Read + Send + 'static, cap: usize) -> std::thread::JoinHandle<String> {
    std::thread::spawn(move || {
        let mut kept = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match reader.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = cap.saturating_sub(kept.len());
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        String::from_utf8_lossy(&kept).into_owned()
    })
}

fn interpret(
    tests: &TestSuite,
    stdout: &str,
    stderr: &str,
    exit_code: Option<i32>,
    timed_out: bool,
    runtime_ms: u64,
) -> CodeRunResult {
    let outcomes = tests
        .cases
        .iter()
        .map(|case| TestOutcome {
            name: case.name.clone(),
            passed: stdout.lines().any(|l| l == format!("@@TEST PASS {}", case.name)),
        })
        .collect();
    let isolation_violation = stderr
        .lines()
        .find_map(|l| l.strip_prefix(VIOLATION_PREFIX))
        .map(str::to_string)
        .or_else(|| (exit_code == Some(VIOLATION_EXIT)).then(|| "isolation guard triggered".to_string()));
    let mut diagnostics = String::new();
    if timed_out {
        diagnostics.push_str("timed out\n");
    }
    diagnostics.push_str(stdout);
    if !stderr.is_empty() {
        diagnostics.push_str("--- stderr ---\n");
        diagnostics.push_str(stderr);
    }
    CodeRunResult {
        tests: outcomes,
        timed_out,
        runtime_ms,
        exit_code,
        sentinel_seen: stdout.lines().any(|l| l == PASS_SENTINEL),
        isolation_violation,
        diagnostics,
    }
}

/// Fraction of tasks whose single candidate passed. Empty input scores 0.
pub fn pass_at_1(results: &[CodeRunResult]) -> f64 {
    if results.is_empty() {
        log::warn!("pass@1 over an empty result list; reporting 0");
        return 0.0;
    }
    results.iter().filter(|r| r.passed()).count() as f64 / results.len() as f64
}

//! Turning candidate text into trace bytes.
//!
//! [`TraceExecutor`] treats the candidate as a trace already. [`ShimExecutor`]
//! runs an external program (for example the Python recording shim) that
//! executes the candidate and writes a trace file. Shim exit codes:
//!
//! | code  | meaning                        |
//! |-------|--------------------------------|
//! | 0     | success, trace file written    |
//! | 3     | candidate failed to compile    |
//! | 4     | candidate raised at runtime    |
//! | 5     | shim's own deadline expired    |
//! | other | treated as a runtime error     |
//!
//! The harness also enforces the deadline itself and kills the shim's whole
//! process group when it expires.

use std::fs;
use std::io::{self, Read, Seek, SeekFrom};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use wait_timeout::ChildExt;

use crate::config::ExecutorConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SYNTAX: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;
pub const EXIT_TIMEOUT: i32 = 5;

const STDERR_EXCERPT: u64 = 2048;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecOutcome {
    Trace(Vec<u8>),
    SyntaxError(String),
    RuntimeError(String),
    Timeout,
}

pub trait Executor: Send + Sync {
    /// Runs `source` inside `work_dir` (created by the caller) with a
    /// wall-clock limit.
    fn run(&self, source: &str, work_dir: &Path, timeout: Duration) -> io::Result<ExecOutcome>;
}

pub fn from_config(cfg: &ExecutorConfig) -> Box<dyn Executor> {
    match cfg {
        ExecutorConfig::Trace => Box::new(TraceExecutor),
        ExecutorConfig::Shim { command } => Box::new(ShimExecutor {
            command: command.clone(),
        }),
    }
}

/// Body of the last fenced block (```` ``` ````) in `text`, or `text` itself
/// when it has no complete fence.
pub fn extract_code_block(text: &str) -> &str {
    let mut last = None;
    let mut open: Option<usize> = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if line.trim_start().starts_with("```") {
            match open.take() {
                None => open = Some(offset + line.len()),
                Some(start) => last = Some(&text[start..offset]),
            }
        }
        offset += line.len();
    }
    last.unwrap_or(text)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TraceExecutor;

impl Executor for TraceExecutor {
    fn run(&self, source: &str, _work_dir: &Path, _timeout: Duration) -> io::Result<ExecOutcome> {
        Ok(ExecOutcome::Trace(
            extract_code_block(source).as_bytes().to_vec(),
        ))
    }
}

#[derive(Debug, Clone)]
pub struct ShimExecutor {
    /// Program and arguments with `{source}` / `{trace}` placeholders.
    pub command: Vec<String>,
}

pub const SOURCE_FILE: &str = "candidate.py";
pub const SHIM_TRACE_FILE: &str = "shim_trace.txt";
pub const STDERR_FILE: &str = "stderr.txt";

impl ShimExecutor {
    fn argv(&self, source: &Path, trace: &Path) -> Vec<String> {
        self.command
            .iter()
            .map(|a| {
                a.replace("{source}", &source.to_string_lossy())
                    .replace("{trace}", &trace.to_string_lossy())
            })
            .collect()
    }
}

impl Executor for ShimExecutor {
    fn run(&self, source: &str, work_dir: &Path, timeout: Duration) -> io::Result<ExecOutcome> {
        let work_dir = work_dir.canonicalize()?;
        let source_path = work_dir.join(SOURCE_FILE);
        let trace_path = work_dir.join(SHIM_TRACE_FILE);
        let stderr_path = work_dir.join(STDERR_FILE);
        fs::write(&source_path, extract_code_block(source))?;
        let _ = fs::remove_file(&trace_path);

        let argv = self.argv(&source_path, &trace_path);
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "empty shim command"))?;
        let stderr = fs::File::create(&stderr_path)?;
        let mut child = Command::new(program)
            .args(args)
            .current_dir(&work_dir)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(stderr)
            .process_group(0)
            .spawn()?;

        let status = match child.wait_timeout(timeout)? {
            Some(status) => status,
            None => {
                kill_group(child.id());
                child.wait()?;
                return Ok(ExecOutcome::Timeout);
            }
        };
        // Reap anything the candidate left running in the group.
        kill_group(child.id());

        let excerpt = || stderr_tail(&stderr_path).unwrap_or_default();
        Ok(match status.code() {
            Some(EXIT_OK) => match fs::read(&trace_path) {
                Ok(bytes) => ExecOutcome::Trace(bytes),
                Err(_) => ExecOutcome::RuntimeError("shim exited 0 without a trace file".into()),
            },
            Some(EXIT_SYNTAX) => ExecOutcome::SyntaxError(excerpt()),
            Some(EXIT_TIMEOUT) => ExecOutcome::Timeout,
            Some(EXIT_RUNTIME) => ExecOutcome::RuntimeError(excerpt()),
            Some(code) => ExecOutcome::RuntimeError(format!("shim exit {code}: {}", excerpt())),
            None => ExecOutcome::RuntimeError(format!("shim killed by signal: {}", excerpt())),
        })
    }
}

fn kill_group(pid: u32) {
    // SAFETY: kill(2) with a negative pid signals the process group created
    // for the child via process_group(0); no memory is shared.
    unsafe {
        libc::kill(-(pid as libc::pid_t), libc::SIGKILL);
    }
}

fn stderr_tail(path: &PathBuf) -> io::Result<String> {
    let mut f = fs::File::open(path)?;
    let len = f.metadata()?.len();
    f.seek(SeekFrom::Start(len.saturating_sub(STDERR_EXCERPT)))?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf)?;
    Ok(String::from_utf8_lossy(&buf).trim().to_string())
}

//! Isolated execution of generated programs.
//!
//! Each run gets a fresh temporary workspace as its working directory, a
//! scrubbed environment, an address-space limit, no network, and (where the
//! kernel supports Landlock) write access confined to the workspace.

mod exec;
mod ingest;
mod verify;

use std::time::Duration;

use thiserror::Error;

pub use exec::{data_env, execute, parse_check, ExecStatus, ExecutionRecord, ParseCheck, SandboxRun};
pub use ingest::{ingest_results, run_simulation, Ingested, RunOptions};
pub use verify::{has_top_level_main_call, verify, CODE_VERIFICATION};

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("interpreter unavailable: {0}")]
    Interpreter(String),
    #[error("sandbox io: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid sandbox limits: {0}")]
    Limits(String),
}

pub const DEFAULT_WALL_CLOCK_SECS: u64 = 120;
pub const DEFAULT_MEMORY_MB: u64 = 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SandboxConfig {
    /// Interpreter command, resolved through the sandbox `PATH`.
    pub interpreter: String,
    /// Arguments that make the interpreter parse a file without running it.
    pub parse_args: Vec<String>,
    pub wall_clock: Duration,
    pub memory_mb: u64,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        SandboxConfig {
            interpreter: "python3".into(),
            parse_args: vec!["-m".into(), "py_compile".into()],
            wall_clock: Duration::from_secs(DEFAULT_WALL_CLOCK_SECS),
            memory_mb: DEFAULT_MEMORY_MB,
        }
    }
}

impl SandboxConfig {
    pub fn validate(&self) -> Result<(), SandboxError> {
        if self.interpreter.trim().is_empty() {
            return Err(SandboxError::Limits("interpreter must be set".into()));
        }
        if self.wall_clock.is_zero() {
            return Err(SandboxError::Limits("wall clock budget must be positive".into()));
        }
        if self.memory_mb == 0 {
            return Err(SandboxError::Limits("memory budget must be positive".into()));
        }
        Ok(())
    }
}

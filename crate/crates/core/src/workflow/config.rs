use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::agent::llm::{HttpBackend, LiveConfig, MatchMode, RecordingBackend, ReplayBackend};
use crate::agent::{LlmBackend, LlmError};
use crate::feedback::DEFAULT_CODE_SUFFIX;
use crate::sandbox::{SandboxConfig, DEFAULT_MEMORY_MB, DEFAULT_WALL_CLOCK_SECS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    #[default]
    Live,
    /// Live calls, each appended to the transcript.
    Record,
    /// Responses served from the transcript; no network.
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct BackendSpec {
    pub mode: BackendMode,
    pub transcript: Option<PathBuf>,
    /// Match replayed calls on agent name only, not the prompt fingerprint.
    pub lenient_replay: bool,
    pub live: LiveConfig,
}

impl BackendSpec {
    /// Builds the backend; a replay backend skips the first `offset` entries.
    pub fn build(&self, offset: usize) -> Result<Arc<dyn LlmBackend>, LlmError> {
        let transcript = || {
            self.transcript
                .clone()
                .ok_or_else(|| LlmError::Config(format!("{:?} mode needs a transcript path", self.mode)))
        };
        Ok(match self.mode {
            BackendMode::Live => Arc::new(HttpBackend::new(self.live.clone())?),
            BackendMode::Record => Arc::new(RecordingBackend::new(HttpBackend::new(self.live.clone())?, &transcript()?)?),
            BackendMode::Replay => {
                let mode = if self.lenient_replay {
                    MatchMode::Lenient
                } else {
                    MatchMode::Strict
                };
                Arc::new(ReplayBackend::from_file(&transcript()?, mode)?.starting_at(offset))
            }
        })
    }
}

/// Everything a run needs, persisted as `run_config.json` so it can resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Raw task file text, passed to the model unchanged.
    pub task_description: String,
    pub data_dir: Option<PathBuf>,
    pub max_iterations: usize,
    pub interpreter: String,
    pub timeout_seconds: u64,
    pub memory_mb: u64,
    /// Program file suffix, without the dot.
    pub code_suffix: String,
    /// `day,rate` reference scored against the `rate` series of each run.
    pub ground_truth: Option<PathBuf>,
    /// Zero timing fields so artifacts are byte-stable.
    pub reproducible: bool,
    pub llm_integrity: bool,
    pub backend: BackendSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task_description: String::new(),
            data_dir: None,
            max_iterations: 3,
            interpreter: "python3".into(),
            timeout_seconds: DEFAULT_WALL_CLOCK_SECS,
            memory_mb: DEFAULT_MEMORY_MB,
            code_suffix: DEFAULT_CODE_SUFFIX.into(),
            ground_truth: None,
            reproducible: false,
            llm_integrity: false,
            backend: BackendSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn sandbox(&self) -> SandboxConfig {
        SandboxConfig {
            interpreter: self.interpreter.clone(),
            wall_clock: Duration::from_secs(self.timeout_seconds),
            memory_mb: self.memory_mb,
            ..SandboxConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_iterations == 0 {
            return Err("max_iterations must be at least 1".into());
        }
        if self.task_description.trim().is_empty() {
            return Err("task description is empty".into());
        }
        if self.code_suffix.is_empty() || self.code_suffix.contains(['/', '.']) {
            return Err(format!("invalid program suffix {:?}", self.code_suffix));
        }
        if self.backend.mode != BackendMode::Live && self.backend.transcript.is_none() {
            return Err(format!("{:?} backend needs a transcript path", self.backend.mode).to_lowercase());
        }
        if let Some(d) = &self.data_dir {
            if !d.is_dir() {
                return Err(format!("data directory {} does not exist", d.display()));
            }
        }
        self.sandbox().validate().map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_rules() {
        let ok = RunConfig {
            task_description: "t".into(),
            ..RunConfig::default()
        };
        assert!(ok.validate().is_ok());
        let zero = RunConfig {
            max_iterations: 0,
            ..ok.clone()
        };
        assert!(zero.validate().unwrap_err().contains("max_iterations"));
        let mut replay = ok.clone();
        replay.backend.mode = BackendMode::Replay;
        assert!(replay.validate().unwrap_err().contains("transcript"));
        let suffix = RunConfig {
            code_suffix: ".py".into(),
            ..ok
        };
        assert!(suffix.validate().is_err());
    }
}

//! The agent contract: render a prompt, call the model, parse the reply.

pub mod json;
pub mod llm;
pub mod prompts;
pub mod template;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde_json::Value;
use thiserror::Error;

use crate::artifacts::{
    Artifact, ArtifactError, DataAnalysisReport, EvaluationResult, ModelPlan, SimulationResult, TaskSpec,
    ValidationReport,
};
pub use json::{extract_json, ExtractError};
pub use llm::{DecodeSettings, LlmBackend, LlmError, LlmRequest, LlmResponse};
pub use prompts::PromptId;
pub use template::{Bindings, PromptTemplate, TemplateError};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("{agent}: {source}")]
    Llm {
        agent: String,
        #[source]
        source: LlmError,
    },
    #[error("{agent}: response contains no JSON object")]
    Parse { agent: String, raw: String },
    #[error("{agent}: response failed validation: {report}")]
    Invalid {
        agent: String,
        report: ValidationReport,
        raw: String,
    },
    #[error("{agent}: {message}")]
    Stage { agent: String, message: String },
}

impl AgentError {
    /// The raw model output behind a parse or validation failure.
    pub fn raw_response(&self) -> Option<&str> {
        match self {
            AgentError::Parse { raw, .. } | AgentError::Invalid { raw, .. } => Some(raw),
            _ => None,
        }
    }
}

/// Shared handle on the model backend for every agent in a run. Counts calls
/// so a run can later be resumed at the right transcript position.
pub struct AgentRuntime {
    backend: Arc<dyn LlmBackend>,
    decode: DecodeSettings,
    calls: AtomicUsize,
}

impl AgentRuntime {
    pub fn new(backend: Arc<dyn LlmBackend>) -> Self {
        Self::with_decode(backend, DecodeSettings::default())
    }

    pub fn with_decode(backend: Arc<dyn LlmBackend>, decode: DecodeSettings) -> Self {
        Self {
            backend,
            decode,
            calls: AtomicUsize::new(0),
        }
    }

    /// Completed model calls so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Sends an already rendered prompt under `label`.
    pub fn complete(&self, label: &str, prompt: String) -> Result<String, AgentError> {
        let request = LlmRequest {
            agent_name: label.to_string(),
            prompt,
            decode: self.decode,
        };
        if request.prompt.is_empty() {
            return Err(AgentError::Llm {
                agent: label.to_string(),
                source: LlmError::EmptyPrompt { agent: label.to_string() },
            });
        }
        let response = self.backend.complete(&request).map_err(|source| AgentError::Llm {
            agent: label.to_string(),
            source,
        })?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        tracing::debug!(agent = label, latency_ms = response.latency.as_millis() as u64, "model call");
        Ok(response.text)
    }

    /// Renders `prompt` with `bindings` and returns the raw completion.
    pub fn call(&self, label: &str, prompt: PromptId, bindings: &Bindings) -> Result<String, AgentError> {
        let text = prompt.template().render(bindings)?;
        self.complete(label, text)
    }

    /// Like [`call`](Self::call), returning the extracted JSON object and the raw text.
    pub fn call_json(&self, label: &str, prompt: PromptId, bindings: &Bindings) -> Result<(Value, String), AgentError> {
        let raw = self.call(label, prompt, bindings)?;
        match extract_json(&raw) {
            Ok(v) => Ok((v, raw)),
            Err(e) => Err(AgentError::Parse {
                agent: label.to_string(),
                raw: e.raw,
            }),
        }
    }

    /// The full contract for agents whose malformed output is fatal.
    pub fn run_agent<T: Artifact>(&self, label: &str, prompt: PromptId, bindings: &Bindings) -> Result<T, AgentError> {
        let (doc, raw) = self.call_json(label, prompt, bindings)?;
        parse_artifact(label, doc, raw)
    }
}

pub(crate) fn parse_artifact<T: Artifact>(label: &str, doc: Value, raw: String) -> Result<T, AgentError> {
    T::from_value(doc).map_err(|e| match e {
        ArtifactError::Invalid { report, .. } => AgentError::Invalid {
            agent: label.to_string(),
            report,
            raw,
        },
        ArtifactError::Shape { message, .. } => AgentError::Stage {
            agent: label.to_string(),
            message,
        },
    })
}

pub const TASK_UNDERSTANDING: &str = "task_understanding";
pub const MODEL_PLANNING: &str = "model_planning";
pub const RESULT_EVALUATION: &str = "result_evaluation";

/// Converts the task description into a [`TaskSpec`].
pub fn understand_task(rt: &AgentRuntime, task_description: &str) -> Result<TaskSpec, AgentError> {
    let b = Bindings::new().text("task_description", task_description);
    rt.run_agent(TASK_UNDERSTANDING, PromptId::TaskUnderstanding, &b)
}

/// Designs the model; `analysis` is `None` when the task has no data.
pub fn plan_model(
    rt: &AgentRuntime,
    task_spec: &TaskSpec,
    analysis: Option<&DataAnalysisReport>,
) -> Result<ModelPlan, AgentError> {
    let b = Bindings::new()
        .json("task_spec", Some(task_spec))
        .json("data_analysis", analysis);
    rt.run_agent(MODEL_PLANNING, PromptId::ModelPlanning, &b)
}

/// Asks the model to compare simulation output with the data.
pub fn evaluate_results(
    rt: &AgentRuntime,
    task_spec: &TaskSpec,
    analysis: Option<&DataAnalysisReport>,
    simulation: &SimulationResult,
) -> Result<EvaluationResult, AgentError> {
    let b = Bindings::new()
        .json("task_spec", Some(task_spec))
        .json("data_analysis", analysis)
        .json("simulation_results", Some(simulation));
    rt.run_agent(RESULT_EVALUATION, PromptId::ResultEvaluation, &b)
}

//! The code generation agent: initial generation, deterministic repair and
//! the bounded self-check loop.

mod post;
mod selfcheck;

use std::fmt;

use crate::agent::{AgentError, AgentRuntime, Bindings, PromptId};
use crate::artifacts::{
    CodeMetadata, DataAnalysisReport, Feedback, GeneratedCode, HistoricalFixLog, ModelPlan, SelfCheckTrace, TaskSpec,
};
use crate::sandbox::SandboxConfig;

pub use post::{apply_feedback_snippets, fix_unclosed_docstrings, postprocess, strip_markdown_fences};
pub use selfcheck::{
    check_feedback_implementation, check_historical_issues, collect_fixed_log_references, quality_check,
    self_check_loop, CheckContext, SelfChecked, FEEDBACK_CHECK, FIX_SYNTAX, HISTORICAL_CHECK, IMPROVE, MAX_ATTEMPTS,
    QUALITY_CHECK,
};

pub const CODE_GENERATION: &str = "code_generation";

/// A generation failure, with the self-check trace gathered before it.
#[derive(Debug)]
pub struct ForgeError {
    pub source: AgentError,
    pub trace: Option<SelfCheckTrace>,
}

impl fmt::Display for ForgeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.trace {
            Some(t) => write!(f, "{} (after {} self-check attempts)", self.source, t.attempts.len()),
            None => self.source.fmt(f),
        }
    }
}

impl std::error::Error for ForgeError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

impl From<AgentError> for ForgeError {
    fn from(source: AgentError) -> Self {
        ForgeError { source, trace: None }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GenerationInputs<'a> {
    pub task_spec: &'a TaskSpec,
    pub model_plan: &'a ModelPlan,
    pub data_analysis: Option<&'a DataAnalysisReport>,
    pub feedback: Option<&'a Feedback>,
    pub previous_code: Option<&'a str>,
    pub fix_log: Option<&'a HistoricalFixLog>,
}

fn top_level_name<'a>(line: &'a str, keyword: &str) -> Option<&'a str> {
    let rest = line.strip_prefix(keyword)?.trim_start();
    let end = rest.find(|c: char| !(c.is_alphanumeric() || c == '_')).unwrap_or(rest.len());
    (end > 0).then(|| &rest[..end])
}

/// Short description of a program from its top-level definitions.
pub fn code_summary(code: &str) -> String {
    let mut classes = Vec::new();
    let mut functions = Vec::new();
    for line in code.lines() {
        if let Some(n) = top_level_name(line, "class ") {
            classes.push(n);
        } else if let Some(n) = top_level_name(line, "def ").or_else(|| top_level_name(line, "async def ")) {
            functions.push(n);
        }
    }
    let list = |v: &[&str]| if v.is_empty() { "none".to_string() } else { v.join(", ") };
    format!(
        "Python program of {} lines. Classes: {}. Functions: {}.",
        code.lines().count(),
        list(&classes),
        list(&functions)
    )
}

fn metadata(plan: &ModelPlan) -> CodeMetadata {
    CodeMetadata {
        model_type: plan.model_type.clone(),
        entities: plan.entities.iter().map(|e| e.name.clone()).collect(),
        behaviors: plan.behaviors.iter().map(|b| b.name.clone()).collect(),
        extra: Default::default(),
    }
}

/// Generates a program, repairs it and runs the self-check loop.
pub fn generate_code(
    rt: &AgentRuntime,
    inputs: &GenerationInputs,
    cfg: &SandboxConfig,
) -> Result<GeneratedCode, ForgeError> {
    let b = Bindings::new()
        .json("feedback", inputs.feedback)
        .opt_text("previous_code", inputs.previous_code)
        .json("task_spec", Some(inputs.task_spec))
        .json("model_plan", Some(inputs.model_plan))
        .json("data_analysis", inputs.data_analysis);
    let raw = rt.call(CODE_GENERATION, PromptId::CodeGeneration, &b)?;
    let snippets = inputs.feedback.map(|f| f.code_snippets.as_slice()).unwrap_or_default();
    let code = postprocess(&raw, snippets);
    let cx = CheckContext {
        task_spec: inputs.task_spec,
        model_plan: inputs.model_plan,
        feedback: inputs.feedback,
        fix_log: inputs.fix_log,
    };
    let checked = self_check_loop(rt, &code, &cx, cfg)?;
    if checked.unresolved_syntax {
        tracing::warn!("generated program still fails the parse gate after the final attempt");
    }
    Ok(GeneratedCode {
        code_summary: code_summary(&checked.code),
        code: checked.code,
        metadata: metadata(inputs.model_plan),
        unresolved_syntax: checked.unresolved_syntax,
        self_check: Some(checked.trace),
        extra: Default::default(),
    })
}

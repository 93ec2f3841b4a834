//! Cross-iteration feedback: code diffs, the fix-log lifecycle, feedback
//! synthesis and the continue/stop decision.

mod diff;
mod fixlog;

use crate::agent::{parse_artifact, AgentError, AgentRuntime, Bindings, PromptId};
use crate::artifacts::{
    EvaluationResult, Feedback, HistoricalFixLog, IterationDecision, SimulationResult, TaskSpec, VerificationResult,
};

pub use diff::{code_file_name, unified_diff, CodeDiff, CONTEXT_LINES, DEFAULT_CODE_SUFFIX};
pub use fixlog::{apply_fix_check, check_fixed_issues, update_fix_log, FixCheckUpdate, FIX_CHECK};

pub const FEEDBACK_GENERATION: &str = "feedback_generation";
pub const ITERATION_CONTROL: &str = "iteration_control";

#[derive(Debug, Clone, Copy)]
pub struct FeedbackInputs<'a> {
    pub task_spec: &'a TaskSpec,
    pub verification: &'a VerificationResult,
    pub simulation: Option<&'a SimulationResult>,
    pub evaluation: Option<&'a EvaluationResult>,
    pub current_code: &'a str,
    pub previous_code: Option<&'a str>,
    pub iteration: usize,
    /// Program file suffix used in the diff headers.
    pub code_suffix: &'a str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackOutcome {
    pub feedback: Feedback,
    /// The fix log after the fix-check transitions.
    pub fix_log: HistoricalFixLog,
    pub fix_check: FixCheckUpdate,
    pub diff: Option<CodeDiff>,
    /// The unusable model reply when the placeholder was substituted.
    pub fallback_raw: Option<String>,
}

/// Runs the fix-check over open entries, then asks for feedback. A reply
/// that does not parse or validate becomes the placeholder feedback.
pub fn generate_feedback(
    rt: &AgentRuntime,
    inputs: &FeedbackInputs,
    fix_log: &HistoricalFixLog,
) -> Result<FeedbackOutcome, AgentError> {
    let diff = inputs
        .previous_code
        .map(|prev| unified_diff(prev, inputs.current_code, inputs.iteration.max(1), inputs.code_suffix));
    let (fix_check, fix_log) = if inputs.iteration > 0 {
        let up = check_fixed_issues(rt, fix_log, inputs.current_code)?;
        let log = apply_fix_check(fix_log, &up);
        (up, log)
    } else {
        (FixCheckUpdate::default(), fix_log.clone())
    };
    let b = Bindings::new()
        .json("task_spec", Some(inputs.task_spec))
        .text("code_content", inputs.current_code)
        .text("code_diff", diff.as_ref().map(|d| d.text.as_str()).unwrap_or(""))
        .json("verification_results", Some(inputs.verification))
        .json("simulation_results", inputs.simulation)
        .json("evaluation_results", inputs.evaluation);
    let (feedback, fallback_raw) = match rt.call_json(FEEDBACK_GENERATION, PromptId::FeedbackGeneration, &b) {
        Ok((doc, raw)) => match parse_artifact::<Feedback>(FEEDBACK_GENERATION, doc, raw.clone()) {
            Ok(f) => (f, None),
            Err(e) => {
                tracing::warn!(error = %e, "feedback reply unusable; using placeholder feedback");
                (Feedback::placeholder(&e.to_string()), Some(raw))
            }
        },
        Err(AgentError::Parse { raw, .. }) => {
            tracing::warn!("feedback reply has no JSON object; using placeholder feedback");
            (Feedback::placeholder("feedback response contained no JSON object"), Some(raw))
        }
        Err(e) => return Err(e),
    };
    Ok(FeedbackOutcome {
        feedback,
        fix_log,
        fix_check,
        diff,
        fallback_raw,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct DecisionInputs<'a> {
    pub current_iteration: usize,
    pub max_iterations: usize,
    pub verification: &'a VerificationResult,
    pub evaluation: Option<&'a EvaluationResult>,
    pub feedback: &'a Feedback,
}

/// Asks whether to run another iteration. An unusable reply yields the
/// fallback decision together with the raw text.
pub fn iteration_decision(
    rt: &AgentRuntime,
    inputs: &DecisionInputs,
) -> Result<(IterationDecision, Option<String>), AgentError> {
    let b = Bindings::new()
        .text("current_iteration", inputs.current_iteration.to_string())
        .text("max_iterations", inputs.max_iterations.to_string())
        .json("verification_results", Some(inputs.verification))
        .json("evaluation_results", inputs.evaluation)
        .json("feedback", Some(inputs.feedback));
    match rt.call_json(ITERATION_CONTROL, PromptId::IterationControl, &b) {
        Ok((doc, raw)) => match parse_artifact::<IterationDecision>(ITERATION_CONTROL, doc, raw.clone()) {
            Ok(d) => Ok((d, None)),
            Err(e) => {
                tracing::warn!(error = %e, "decision reply unusable; using fallback decision");
                Ok((IterationDecision::fallback(), Some(raw)))
            }
        },
        Err(AgentError::Parse { raw, .. }) => {
            tracing::warn!("decision reply has no JSON object; using fallback decision");
            Ok((IterationDecision::fallback(), Some(raw)))
        }
        Err(e) => Err(e),
    }
}

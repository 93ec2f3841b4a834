use std::collections::BTreeSet;

use serde_json::{json, Value};

use super::post::{fix_unclosed_docstrings, strip_markdown_fences};
use super::ForgeError;
use crate::agent::llm::fingerprint;
use crate::agent::{AgentError, AgentRuntime, Bindings, PromptId};
use crate::artifacts::{
    CodeIssue, Feedback, FixStatus, HistoricalFixLog, IssueSource, ModelPlan, SelfCheckAttempt, SelfCheckTrace,
    TaskSpec, Termination,
};
use crate::sandbox::{parse_check, ParseCheck, SandboxConfig};

pub const MAX_ATTEMPTS: usize = 3;
pub const QUALITY_CHECK: &str = "code_generation.quality_check";
pub const FEEDBACK_CHECK: &str = "code_generation.feedback_check";
pub const HISTORICAL_CHECK: &str = "code_generation.historical_check";
pub const IMPROVE: &str = "code_generation.improve";
pub const FIX_SYNTAX: &str = "code_generation.fix_syntax";

/// What the checks compare the program against.
#[derive(Debug, Clone, Copy)]
pub struct CheckContext<'a> {
    pub task_spec: &'a TaskSpec,
    pub model_plan: &'a ModelPlan,
    pub feedback: Option<&'a Feedback>,
    pub fix_log: Option<&'a HistoricalFixLog>,
}

fn parse_issues(label: &str, doc: &Value, source: IssueSource) -> Vec<CodeIssue> {
    let Some(items) = doc.get("issues").and_then(Value::as_array) else {
        tracing::warn!(check = label, "check output has no issues list; treating as clean");
        return Vec::new();
    };
    items
        .iter()
        .filter_map(|item| {
            let text = |k: &str| item.get(k).and_then(Value::as_str).unwrap_or("").trim().to_string();
            let description = text("description");
            (!description.is_empty()).then(|| CodeIssue {
                source,
                description,
                location: text("location"),
                severity: text("severity").to_lowercase(),
            })
        })
        .collect()
}

/// Runs one check. Output without a JSON object counts as no issues.
fn run_check(
    rt: &AgentRuntime,
    label: &str,
    prompt: PromptId,
    b: &Bindings,
    source: IssueSource,
) -> Result<Vec<CodeIssue>, AgentError> {
    match rt.call_json(label, prompt, b) {
        Ok((doc, _)) => Ok(parse_issues(label, &doc, source)),
        Err(AgentError::Parse { .. }) => {
            tracing::warn!(check = label, "malformed check output; treating as clean");
            Ok(Vec::new())
        }
        Err(e) => Err(e),
    }
}

pub fn quality_check(rt: &AgentRuntime, code: &str, cx: &CheckContext) -> Result<Vec<CodeIssue>, AgentError> {
    let b = Bindings::new()
        .json("task_spec", Some(cx.task_spec))
        .json("model_plan", Some(cx.model_plan))
        .text("code", code);
    run_check(rt, QUALITY_CHECK, PromptId::QualityCheck, &b, IssueSource::Quality)
}

pub fn check_feedback_implementation(
    rt: &AgentRuntime,
    code: &str,
    feedback: &Feedback,
) -> Result<Vec<CodeIssue>, AgentError> {
    let b = Bindings::new().json("feedback", Some(feedback)).text("code", code);
    run_check(rt, FEEDBACK_CHECK, PromptId::FeedbackCheck, &b, IssueSource::FeedbackUnimplemented)
}

fn normalized(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Regressions of fixed entries. Reported issues that quote no fixed entry
/// are dropped. An empty list when the log has no fixed entries, without a
/// model call.
pub fn check_historical_issues(
    rt: &AgentRuntime,
    code: &str,
    fix_log: &HistoricalFixLog,
) -> Result<Vec<CodeIssue>, AgentError> {
    let fixed = fix_log.filtered(FixStatus::Fixed);
    if fixed.is_empty() {
        return Ok(Vec::new());
    }
    let b = Bindings::new().json("fixed_issues", Some(&fixed)).text("code", code);
    let issues = run_check(rt, HISTORICAL_CHECK, PromptId::HistoricalCheck, &b, IssueSource::HistoricalRegression)?;
    let known: Vec<String> = fixed.entries().map(|(_, e)| normalized(&e.issue)).collect();
    Ok(issues
        .into_iter()
        .filter(|i| {
            let d = normalized(&i.description);
            let hit = known.iter().any(|k| !k.is_empty() && (d.contains(k.as_str()) || k.contains(&d)));
            if !hit {
                tracing::warn!(issue = %i.description, "regression report matches no fixed entry; dropped");
            }
            hit
        })
        .collect())
}

fn tokens(s: &str) -> BTreeSet<String> {
    s.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| t.len() >= 4)
        .map(str::to_ascii_lowercase)
        .collect()
}

/// Fixed entries sharing a word of four or more characters with any issue.
pub fn collect_fixed_log_references(issues: &[CodeIssue], fix_log: Option<&HistoricalFixLog>) -> Vec<Value> {
    let Some(log) = fix_log else { return Vec::new() };
    let wanted: BTreeSet<String> = issues.iter().flat_map(|i| tokens(&i.description)).collect();
    log.entries()
        .filter(|(_, e)| e.status == FixStatus::Fixed)
        .filter(|(_, e)| !tokens(&e.issue).is_disjoint(&wanted))
        .map(|(k, e)| json!({"iteration": k, "issue": e.issue, "fixed_log": e.fixed_log}))
        .collect()
}

fn improve(rt: &AgentRuntime, code: &str, issues: &[CodeIssue], refs: &[Value], cx: &CheckContext) -> Result<String, AgentError> {
    let b = Bindings::new()
        .json("task_spec", Some(cx.task_spec))
        .json("model_plan", Some(cx.model_plan))
        .json("issues", Some(&issues))
        .json("fixed_references", (!refs.is_empty()).then_some(&refs))
        .text("code", code);
    let raw = rt.call(IMPROVE, PromptId::ImproveCode, &b)?;
    Ok(fix_unclosed_docstrings(&strip_markdown_fences(&raw)))
}

fn fix_syntax(rt: &AgentRuntime, code: &str, diagnostic: &str) -> Result<String, AgentError> {
    let b = Bindings::new().text("diagnostic", diagnostic).text("code", code);
    let raw = rt.call(FIX_SYNTAX, PromptId::FixSyntax, &b)?;
    Ok(fix_unclosed_docstrings(&strip_markdown_fences(&raw)))
}

fn gate(code: &str, cfg: &SandboxConfig) -> Result<ParseCheck, AgentError> {
    parse_check(code, cfg).map_err(|e| AgentError::Stage {
        agent: QUALITY_CHECK.into(),
        message: e.to_string(),
    })
}

/// Result of the self-check loop.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfChecked {
    pub code: String,
    pub trace: SelfCheckTrace,
    /// The returned program still fails the parse gate.
    pub unresolved_syntax: bool,
}

/// Up to three rounds of checks and improvement. A program that fails the
/// parse gate is never reported clean: the parse failure joins the issue list.
pub fn self_check_loop(
    rt: &AgentRuntime,
    code: &str,
    cx: &CheckContext,
    cfg: &SandboxConfig,
) -> Result<SelfChecked, ForgeError> {
    let mut code = code.to_string();
    let mut attempts: Vec<SelfCheckAttempt> = Vec::new();
    let mut syntax_fix_calls = 0;
    let fail = |source: AgentError, attempts: &[SelfCheckAttempt], calls: usize| ForgeError {
        source,
        trace: Some(SelfCheckTrace {
            attempts: attempts.to_vec(),
            terminated_by: Termination::AttemptsExhausted,
            syntax_fix_calls: calls,
        }),
    };
    let mut parsed = gate(&code, cfg).map_err(|e| fail(e, &attempts, 0))?;
    let mut terminated_by = Termination::AttemptsExhausted;

    for attempt in 1..=MAX_ATTEMPTS {
        tracing::info!(attempt, "self-checking attempt");
        let mut issues = quality_check(rt, &code, cx).map_err(|e| fail(e, &attempts, syntax_fix_calls))?;
        if let Some(fb) = cx.feedback.filter(|f| !f.is_placeholder()) {
            issues.extend(check_feedback_implementation(rt, &code, fb).map_err(|e| fail(e, &attempts, syntax_fix_calls))?);
        }
        if let Some(log) = cx.fix_log {
            issues.extend(check_historical_issues(rt, &code, log).map_err(|e| fail(e, &attempts, syntax_fix_calls))?);
        }
        if !parsed.ok {
            issues.push(CodeIssue {
                source: IssueSource::Quality,
                description: format!(
                    "Program does not parse: {}",
                    parsed.diagnostic.as_deref().unwrap_or("syntax error")
                ),
                location: String::new(),
                severity: "critical".into(),
            });
        }
        if issues.is_empty() {
            attempts.push(SelfCheckAttempt {
                attempt,
                issues,
                code_fingerprint: None,
            });
            terminated_by = Termination::Clean;
            tracing::info!(attempt, "self-check passed");
            break;
        }
        tracing::info!(attempt, issues = issues.len(), "improving code");
        let refs = collect_fixed_log_references(&issues, cx.fix_log);
        let mut improved = improve(rt, &code, &issues, &refs, cx).map_err(|e| fail(e, &attempts, syntax_fix_calls))?;
        parsed = gate(&improved, cfg).map_err(|e| fail(e, &attempts, syntax_fix_calls))?;
        if !parsed.ok && attempt == MAX_ATTEMPTS {
            let diagnostic = parsed.diagnostic.clone().unwrap_or_default();
            syntax_fix_calls += 1;
            improved = fix_syntax(rt, &improved, &diagnostic).map_err(|e| fail(e, &attempts, syntax_fix_calls))?;
            parsed = gate(&improved, cfg).map_err(|e| fail(e, &attempts, syntax_fix_calls))?;
        }
        code = improved;
        attempts.push(SelfCheckAttempt {
            attempt,
            issues,
            code_fingerprint: Some(fingerprint(&code)),
        });
    }
    Ok(SelfChecked {
        code,
        unresolved_syntax: !parsed.ok,
        trace: SelfCheckTrace {
            attempts,
            terminated_by,
            syntax_fix_calls,
        },
    })
}

use serde_json::Value;

use crate::agent::{AgentError, AgentRuntime, Bindings, PromptId};
use crate::artifacts::{Feedback, FixLogEntry, FixStatus, HistoricalFixLog};

pub const FIX_CHECK: &str = "feedback_generation.fix_check";

/// Accepted open-to-fixed transitions, keyed like the fix log.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FixCheckUpdate {
    pub fixed: Vec<(String, String, String)>,
    /// Entries of the reply that were rejected, with the reason.
    pub dropped: Vec<String>,
}

impl FixCheckUpdate {
    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty()
    }
}

fn same_issue(a: &str, b: &str) -> bool {
    a.trim() == b.trim()
}

/// Keeps only transitions of open entries already in `log` to fixed with a
/// non-empty explanation.
fn conform(log: &HistoricalFixLog, reply: &Value) -> FixCheckUpdate {
    let mut up = FixCheckUpdate::default();
    let Some(obj) = reply.as_object() else {
        up.dropped.push("reply is not an object".into());
        return up;
    };
    for (key, items) in obj {
        let Some(items) = items.as_array() else {
            up.dropped.push(format!("{key}: not a list"));
            continue;
        };
        let existing = log.0.get(key);
        for item in items {
            let text = |k: &str| item.get(k).and_then(Value::as_str).unwrap_or("").trim().to_string();
            let (issue, status, fixed_log) = (text("issue"), text("status").to_lowercase(), text("fixed_log"));
            let open_match = existing.and_then(|v| {
                v.iter()
                    .find(|e| e.status == FixStatus::Open && same_issue(&e.issue, &issue))
            });
            match (open_match, status.as_str()) {
                (None, _) => up.dropped.push(format!("{key}: {issue:?} is not an open entry of the log")),
                (Some(_), "open") => {}
                (Some(_), "fixed") if fixed_log.is_empty() => {
                    up.dropped.push(format!("{key}: {issue:?} marked fixed without a fixed_log"))
                }
                (Some(e), "fixed") => {
                    if !up.fixed.iter().any(|(k, i, _)| k == key && i == &e.issue) {
                        up.fixed.push((key.clone(), e.issue.clone(), fixed_log));
                    }
                }
                (Some(_), other) => up.dropped.push(format!("{key}: {issue:?} has unknown status {other:?}")),
            }
        }
    }
    for d in &up.dropped {
        tracing::warn!(reason = %d, "fix-check entry dropped");
    }
    up
}

/// Asks which open entries the current program has fixed. No model call
/// when nothing is open; an unparseable reply yields an empty update.
pub fn check_fixed_issues(
    rt: &AgentRuntime,
    log: &HistoricalFixLog,
    current_code: &str,
) -> Result<FixCheckUpdate, AgentError> {
    let open = log.filtered(FixStatus::Open);
    if open.is_empty() {
        return Ok(FixCheckUpdate::default());
    }
    let b = Bindings::new()
        .json("historical_issues", Some(&open))
        .text("code_content", current_code);
    match rt.call_json(FIX_CHECK, PromptId::FixCheck, &b) {
        Ok((reply, _)) => Ok(conform(log, &reply)),
        Err(AgentError::Parse { .. }) => {
            tracing::warn!("fix-check reply has no JSON object; fix log unchanged");
            Ok(FixCheckUpdate::default())
        }
        Err(e) => Err(e),
    }
}

/// Applies accepted transitions. Fixed entries are never reopened.
pub fn apply_fix_check(log: &HistoricalFixLog, update: &FixCheckUpdate) -> HistoricalFixLog {
    let mut out = log.clone();
    for (key, issue, fixed_log) in &update.fixed {
        if let Some(entry) = out
            .0
            .get_mut(key)
            .and_then(|v| v.iter_mut().find(|e| e.status == FixStatus::Open && &e.issue == issue))
        {
            entry.status = FixStatus::Fixed;
            entry.fixed_log = fixed_log.clone();
        }
    }
    out
}

/// Records each critical issue and code improvement of `feedback` as an open
/// entry under `iteration_<N>`, skipping texts already present there.
pub fn update_fix_log(feedback: &Feedback, log: &HistoricalFixLog, iteration: usize) -> HistoricalFixLog {
    let mut out = log.clone();
    let texts = feedback
        .critical_issues
        .iter()
        .map(|c| c.issue.trim())
        .chain(feedback.code_improvements.iter().map(|c| c.modification.trim()))
        .filter(|t| !t.is_empty());
    let key = HistoricalFixLog::key(iteration);
    for t in texts {
        let entries = out.0.entry(key.clone()).or_default();
        if !entries.iter().any(|e| e.issue == t) {
            entries.push(FixLogEntry::open(t));
        }
    }
    out
}

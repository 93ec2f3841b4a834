use serde_json::{json, Value};

use super::exec::parse_check;
use super::SandboxConfig;
use crate::agent::{parse_artifact, AgentError, AgentRuntime, Bindings, PromptId};
use crate::artifacts::{TaskSpec, VerificationIssue, VerificationResult};

pub const CODE_VERIFICATION: &str = "code_verification";

const MAIN_CALLS: [&str; 4] = ["main(", "sys.exit(main(", "exit(main(", "raise SystemExit(main("];

/// Whether a module-level statement calls `main()` unguarded. Lines inside
/// triple-quoted strings are ignored; anything indented (including the body
/// of an `if __name__ == "__main__":` guard) does not count.
pub fn has_top_level_main_call(code: &str) -> bool {
    let mut open: Option<&str> = None;
    for line in code.lines() {
        if open.is_none() && MAIN_CALLS.iter().any(|m| line.starts_with(m)) {
            return true;
        }
        let mut rest = line;
        loop {
            match open {
                Some(delim) => match rest.find(delim) {
                    Some(i) => {
                        rest = &rest[i + 3..];
                        open = None;
                    }
                    None => break,
                },
                None => {
                    let code_part = rest.split('#').next().unwrap_or("");
                    let next = ["\"\"\"", "'''"]
                        .into_iter()
                        .filter_map(|d| code_part.find(d).map(|i| (i, d)))
                        .min();
                    match next {
                        Some((i, d)) => {
                            rest = &rest[i + 3..];
                            open = Some(d);
                        }
                        None => break,
                    }
                }
            }
        }
    }
    false
}

fn lowercase_severities(doc: &mut Value) {
    if let Some(issues) = doc.get_mut("issues").and_then(Value::as_array_mut) {
        for issue in issues {
            if let Some(sev) = issue.get_mut("severity") {
                if let Some(s) = sev.as_str() {
                    *sev = Value::String(s.trim().to_lowercase());
                }
            }
        }
    }
}

fn structural_issue(kind: &str, description: String, solution: &str) -> VerificationIssue {
    VerificationIssue {
        kind: kind.into(),
        severity: "critical".into(),
        description,
        location: String::new(),
        solution: solution.into(),
        extra: Default::default(),
    }
}

/// Combines the parse check, the main-call check and the model review.
/// The model is consulted even when parsing fails, for its diagnostics.
pub fn verify(
    rt: &AgentRuntime,
    code: &str,
    task_spec: &TaskSpec,
    cfg: &SandboxConfig,
) -> Result<VerificationResult, AgentError> {
    let parsed = parse_check(code, cfg).map_err(|e| AgentError::Stage {
        agent: CODE_VERIFICATION.into(),
        message: e.to_string(),
    })?;
    let main_call = has_top_level_main_call(code);

    let b = Bindings::new().json("task_spec", Some(task_spec)).text("code", code);
    let (mut doc, raw) = rt.call_json(CODE_VERIFICATION, PromptId::CodeVerification, &b)?;
    lowercase_severities(&mut doc);
    let mut result: VerificationResult = parse_artifact(CODE_VERIFICATION, doc, raw)?;
    let llm_passed = result.passed;

    if !parsed.ok {
        result.issues.insert(
            0,
            structural_issue(
                "syntax",
                format!(
                    "Program does not parse: {}",
                    parsed.diagnostic.as_deref().unwrap_or("unknown error")
                ),
                "Fix the syntax error reported by the interpreter.",
            ),
        );
    }
    if !main_call {
        result.issues.push(structural_issue(
            "implementation",
            "No unguarded top-level call to main() found; the program must end with a direct main() call.".into(),
            "Add a module-level `main()` call at the end of the file.",
        ));
    }
    result.verification_details.syntax_check = parsed.ok;
    if !main_call {
        result.verification_details.implementation_check = false;
    }
    result.passed = llm_passed && parsed.ok && main_call;
    result.extra.insert(
        "structural_checks".into(),
        json!({
            "parse_ok": parsed.ok,
            "parse_diagnostic": parsed.diagnostic,
            "top_level_main_call": main_call,
            "llm_passed": llm_passed,
        }),
    );
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn main_call_detection() {
        assert!(has_top_level_main_call("def main():\n    pass\n\nmain()\n"));
        assert!(has_top_level_main_call("import sys\nsys.exit(main())\n"));
        assert!(!has_top_level_main_call("if __name__ == \"__main__\":\n    main()\n"));
        assert!(!has_top_level_main_call("def f():\n    main()\n"));
        assert!(!has_top_level_main_call("\"\"\"Doc.\nmain()\n\"\"\"\n"));
        assert!(has_top_level_main_call("x = '''a''' # '''\nmain()\n"));
        assert!(!has_top_level_main_call("mainloop()\n"));
    }
}

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;
use serde_json::{Map, Value};

use super::{ArtifactKind, ADJUSTABLE_AGENTS};

/// One violated schema rule, located by a dotted path such as
/// `convergence_assessment.code_quality` or `issues[2].severity`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() { "<root>" } else { &self.path };
        write!(f, "{path}: {}", self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter()
    }

    pub fn has_path(&self, path: &str) -> bool {
        self.violations.iter().any(|v| v.path == path)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks `doc` against the schema for `kind`. Never panics; every rule
/// violation is reported.
pub fn validate_artifact(kind: ArtifactKind, doc: &Value) -> ValidationReport {
    let mut cx = Ctx::default();
    match kind {
        ArtifactKind::TaskSpec => task_spec(&mut cx, doc),
        ArtifactKind::DataAnalysis => data_analysis(&mut cx, doc),
        ArtifactKind::ModelPlan => model_plan(&mut cx, doc),
        ArtifactKind::GeneratedCode => generated_code(&mut cx, doc),
        ArtifactKind::VerificationResult => verification(&mut cx, doc),
        ArtifactKind::SimulationResult => simulation(&mut cx, doc),
        ArtifactKind::EvaluationResult => evaluation(&mut cx, doc),
        ArtifactKind::Feedback => feedback(&mut cx, doc),
        ArtifactKind::IterationDecision => decision(&mut cx, doc),
        ArtifactKind::FixLog => fix_log(&mut cx, doc),
    }
    ValidationReport { violations: cx.out }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn index(path: &str, i: usize) -> String {
    format!("{path}[{i}]")
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

#[derive(Default)]
struct Ctx {
    out: Vec<Violation>,
}

impl Ctx {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.out.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    fn object<'v>(&mut self, v: &'v Value, path: &str) -> Option<&'v Map<String, Value>> {
        match v {
            Value::Object(m) => Some(m),
            other => {
                self.push(path, format!("expected object, found {}", type_name(other)));
                None
            }
        }
    }

    /// Required field lookup; records a violation when absent.
    fn req<'v>(&mut self, m: &'v Map<String, Value>, key: &str, path: &str) -> Option<&'v Value> {
        let v = m.get(key);
        if v.is_none() {
            self.push(join(path, key), "required field is missing");
        }
        v
    }

    fn string<'v>(&mut self, v: &'v Value, path: &str) -> Option<&'v str> {
        match v {
            Value::String(s) => Some(s),
            other => {
                self.push(path, format!("expected string, found {}", type_name(other)));
                None
            }
        }
    }

    fn boolean(&mut self, v: &Value, path: &str) -> Option<bool> {
        match v {
            Value::Bool(b) => Some(*b),
            other => {
                self.push(path, format!("expected boolean, found {}", type_name(other)));
                None
            }
        }
    }

    fn number(&mut self, v: &Value, path: &str) -> Option<f64> {
        match v.as_f64() {
            Some(x) if v.is_number() => Some(x),
            _ => {
                self.push(path, format!("expected number, found {}", type_name(v)));
                None
            }
        }
    }

    fn integer(&mut self, v: &Value, path: &str) -> Option<i64> {
        match v.as_i64() {
            Some(x) => Some(x),
            None => {
                self.push(path, format!("expected integer, found {}", type_name(v)));
                None
            }
        }
    }

    fn array<'v>(&mut self, v: &'v Value, path: &str) -> Option<&'v Vec<Value>> {
        match v {
            Value::Array(a) => Some(a),
            other => {
                self.push(path, format!("expected array, found {}", type_name(other)));
                None
            }
        }
    }

    fn req_string<'v>(&mut self, m: &'v Map<String, Value>, key: &str, path: &str) -> Option<&'v str> {
        let v = self.req(m, key, path)?;
        self.string(v, &join(path, key))
    }

    fn req_bool(&mut self, m: &Map<String, Value>, key: &str, path: &str) -> Option<bool> {
        let v = self.req(m, key, path)?;
        self.boolean(v, &join(path, key))
    }

    fn req_array<'v>(&mut self, m: &'v Map<String, Value>, key: &str, path: &str) -> Option<&'v Vec<Value>> {
        let v = self.req(m, key, path)?;
        self.array(v, &join(path, key))
    }

    fn req_object<'v>(&mut self, m: &'v Map<String, Value>, key: &str, path: &str) -> Option<&'v Map<String, Value>> {
        let v = self.req(m, key, path)?;
        self.object(v, &join(path, key))
    }

    fn opt_string(&mut self, m: &Map<String, Value>, key: &str, path: &str) {
        if let Some(v) = present(m, key) {
            self.string(v, &join(path, key));
        }
    }

    fn opt_bool(&mut self, m: &Map<String, Value>, key: &str, path: &str) {
        if let Some(v) = present(m, key) {
            self.boolean(v, &join(path, key));
        }
    }

    fn opt_array<'v>(&mut self, m: &'v Map<String, Value>, key: &str, path: &str) -> Option<&'v Vec<Value>> {
        present(m, key).and_then(|v| self.array(v, &join(path, key)))
    }

    fn opt_object<'v>(&mut self, m: &'v Map<String, Value>, key: &str, path: &str) -> Option<&'v Map<String, Value>> {
        present(m, key).and_then(|v| self.object(v, &join(path, key)))
    }

    fn string_list(&mut self, items: &[Value], path: &str, non_empty: bool) {
        for (i, item) in items.iter().enumerate() {
            let p = index(path, i);
            if let Some(s) = self.string(item, &p) {
                if non_empty && s.trim().is_empty() {
                    self.push(p, "entry must be a non-empty string");
                }
            }
        }
    }

    fn object_list<'v>(&mut self, items: &'v [Value], path: &str) -> Vec<(String, &'v Map<String, Value>)> {
        items
            .iter()
            .enumerate()
            .filter_map(|(i, item)| {
                let p = index(path, i);
                self.object(item, &p).map(|m| (p, m))
            })
            .collect()
    }

    fn unit_score(&mut self, m: &Map<String, Value>, key: &str, path: &str) {
        let p = join(path, key);
        if let Some(x) = self.req(m, key, path).and_then(|v| self.number(v, &p)) {
            if !(0.0..=1.0).contains(&x) {
                self.push(p, format!("value {x} is outside the bound [0,1]"));
            }
        }
    }

    fn prediction_period(&mut self, m: &Map<String, Value>, path: &str) {
        let Some(pp) = self.opt_object(m, "prediction_period", path) else {
            return;
        };
        let p = join(path, "prediction_period");
        let start = self.req(pp, "start_day", &p).and_then(|v| self.integer(v, &join(&p, "start_day")));
        let end = self.req(pp, "end_day", &p).and_then(|v| self.integer(v, &join(&p, "end_day")));
        if let (Some(s), Some(e)) = (start, end) {
            if s > e {
                self.push(p, format!("start_day {s} is after end_day {e}"));
            }
        }
    }

    fn evaluation_metrics(&mut self, m: &Map<String, Value>, path: &str) {
        if let Some(list) = self.opt_array(m, "evaluation_metrics", path) {
            self.string_list(list, &join(path, "evaluation_metrics"), true);
        }
    }

    /// Each element must be an object carrying a string `name`; names unique.
    fn named_list(&mut self, items: &[Value], path: &str, unique: bool) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut names = Vec::new();
        for (p, obj) in self.object_list(items, path) {
            if let Some(name) = self.req_string(obj, "name", &p) {
                if unique && !seen.insert(name.to_string()) {
                    self.push(join(&p, "name"), format!("duplicate name {name:?}"));
                }
                names.push(name.to_string());
            }
        }
        names
    }
}

/// Optional field: absent and `null` both count as "not provided".
fn present<'v>(m: &'v Map<String, Value>, key: &str) -> Option<&'v Value> {
    m.get(key).filter(|v| !v.is_null())
}

fn task_spec(cx: &mut Ctx, doc: &Value) {
    let Some(m) = cx.object(doc, "") else { return };
    for key in ["title", "description", "simulation_type"] {
        cx.req_string(m, key, "");
    }
    if let Some(entities) = cx.req_array(m, "entities", "") {
        cx.named_list(entities, "entities", true);
        for (p, e) in cx.object_list(entities, "entities") {
            for key in ["attributes", "behaviors"] {
                if let Some(list) = cx.opt_array(e, key, &p) {
                    cx.string_list(list, &join(&p, key), false);
                }
            }
        }
    }
    if let Some(list) = cx.opt_array(m, "interactions", "") {
        cx.named_list(list, "interactions", false);
    }
    cx.opt_object(m, "parameters", "");
    for key in ["metrics", "validation_criteria"] {
        if let Some(list) = cx.opt_array(m, key, "") {
            cx.named_list(list, key, false);
        }
    }
    cx.prediction_period(m, "");
    cx.evaluation_metrics(m, "");
    if let Some(files) = cx.opt_array(m, "data_files", "") {
        cx.named_list(files, "data_files", false);
    }
}

fn data_analysis(cx: &mut Ctx, doc: &Value) {
    let Some(m) = cx.object(doc, "") else { return };
    if let Some(summary) = cx.req_object(m, "data_summary", "") {
        for key in ["key_patterns", "key_distributions", "key_relationships"] {
            if let Some(list) = cx.opt_array(summary, key, "data_summary") {
                cx.object_list(list, &join("data_summary", key));
            }
        }
        if let Some(rels) = cx.opt_array(summary, "key_relationships", "data_summary") {
            for (p, rel) in cx.object_list(rels, "data_summary.key_relationships") {
                if let Some(vars) = cx.req_array(rel, "variables", &p) {
                    let vp = join(&p, "variables");
                    cx.string_list(vars, &vp, true);
                    if vars.len() < 2 {
                        cx.push(vp, "a relationship needs at least two variable names");
                    }
                }
            }
        }
    }
    cx.req_object(m, "simulation_parameters", "");
    cx.req_object(m, "calibration_strategy", "");
    if let Some(files) = cx.opt_object(m, "file_summaries", "") {
        for (name, text) in files {
            cx.string(text, &join("file_summaries", name));
        }
    }
}

fn model_plan(cx: &mut Ctx, doc: &Value) {
    let Some(m) = cx.object(doc, "") else { return };
    cx.req_string(m, "model_type", "");
    cx.req_string(m, "description", "");
    let entities = match cx.req_array(m, "entities", "") {
        Some(list) => cx.named_list(list, "entities", true),
        None => Vec::new(),
    };
    if let Some(list) = cx.opt_array(m, "behaviors", "") {
        cx.named_list(list, "behaviors", false);
        for (p, b) in cx.object_list(list, "behaviors") {
            let Some(targets) = cx.opt_array(b, "applicable_to", &p) else {
                continue;
            };
            let tp = join(&p, "applicable_to");
            for (i, t) in targets.iter().enumerate() {
                if let Some(name) = cx.string(t, &index(&tp, i)) {
                    if !entities.iter().any(|e| e == name) {
                        cx.push(index(&tp, i), format!("{name:?} is not a declared entity"));
                    }
                }
            }
        }
    }
    if let Some(list) = cx.opt_array(m, "interactions", "") {
        cx.object_list(list, "interactions");
    }
    for key in ["environment", "parameters", "initialization", "algorithms", "code_structure"] {
        cx.opt_object(m, key, "");
    }
    cx.opt_array(m, "data_sources", "");
    cx.prediction_period(m, "");
    cx.evaluation_metrics(m, "");
}

fn generated_code(cx: &mut Ctx, doc: &Value) {
    let Some(m) = cx.object(doc, "") else { return };
    if let Some(code) = cx.req_string(m, "code", "") {
        if code.trim().is_empty() {
            cx.push("code", "program text must be non-empty");
        }
    }
    cx.req_string(m, "code_summary", "");
    if let Some(meta) = cx.req_object(m, "metadata", "") {
        cx.req_string(meta, "model_type", "metadata");
        for key in ["entities", "behaviors"] {
            if let Some(list) = cx.req_array(meta, key, "metadata") {
                cx.string_list(list, &join("metadata", key), true);
            }
        }
    }
    cx.opt_bool(m, "unresolved_syntax", "");
}

pub(crate) const SEVERITIES: [&str; 4] = ["critical", "high", "medium", "low"];
pub(crate) const VERIFICATION_CHECKS: [&str; 6] = [
    "syntax_check",
    "imports_check",
    "implementation_check",
    "logic_check",
    "error_handling_check",
    "performance_check",
];

fn verification(cx: &mut Ctx, doc: &Value) {
    let Some(m) = cx.object(doc, "") else { return };
    let passed = cx.req_bool(m, "passed", "");
    cx.req_string(m, "summary", "");
    if let Some(issues) = cx.req_array(m, "issues", "") {
        for (p, issue) in cx.object_list(issues, "issues") {
            for key in ["type", "description", "location", "solution"] {
                cx.opt_string(issue, key, &p);
            }
            if let Some(sev) = cx.req_string(issue, "severity", &p) {
                if !SEVERITIES.contains(&sev) {
                    cx.push(join(&p, "severity"), format!("{sev:?} is not one of critical, high, medium, low"));
                }
            }
        }
    }
    cx.opt_array(m, "suggestions", "");
    if let Some(details) = cx.req_object(m, "verification_details", "") {
        let mut syntax = None;
        for key in VERIFICATION_CHECKS {
            let v = cx.req_bool(details, key, "verification_details");
            if key == "syntax_check" {
                syntax = v;
            }
        }
        if passed == Some(true) && syntax == Some(false) {
            cx.push("verification_details.syntax_check", "passed requires syntax_check to be true");
        }
    }
}

fn numeric_map(cx: &mut Ctx, m: &Map<String, Value>, path: &str) {
    for (k, v) in m {
        cx.number(v, &join(path, k));
    }
}

fn simulation(cx: &mut Ctx, doc: &Value) {
    let Some(m) = cx.object(doc, "") else { return };
    let status = cx.req_string(m, "execution_status", "");
    if let Some(s) = status {
        if !["success", "partial_success", "failure"].contains(&s) {
            cx.push("execution_status", format!("{s:?} is not one of success, partial_success, failure"));
        }
    }
    if let Some(errors) = cx.req_array(m, "runtime_errors", "") {
        for (p, e) in cx.object_list(errors, "runtime_errors") {
            for key in ["error_type", "message", "location"] {
                cx.opt_string(e, key, &p);
            }
        }
        if status == Some("success") && !errors.is_empty() {
            cx.push("runtime_errors", "a successful execution cannot carry runtime errors");
        }
    }
    if let Some(perf) = cx.req_object(m, "performance_metrics", "") {
        if let Some(t) = cx
            .req(perf, "execution_time", "performance_metrics")
            .and_then(|v| cx.number(v, "performance_metrics.execution_time"))
        {
            if t < 0.0 {
                cx.push("performance_metrics.execution_time", "must be non-negative");
            }
        }
        if let Some(mem) = present(perf, "memory_usage") {
            cx.number(mem, "performance_metrics.memory_usage");
        }
    }
    if let Some(metrics) = cx.req_object(m, "simulation_metrics", "") {
        numeric_map(cx, metrics, "simulation_metrics");
    }
    if let Some(series) = cx.req_array(m, "time_series_data", "") {
        let mut last: Option<i64> = None;
        for (p, step) in cx.object_list(series, "time_series_data") {
            let t = cx.req(step, "time_step", &p).and_then(|v| cx.integer(v, &join(&p, "time_step")));
            if let Some(t) = t {
                if last.is_some_and(|l| t <= l) {
                    cx.push(join(&p, "time_step"), "time steps must be strictly increasing");
                }
                last = Some(t);
            }
            if let Some(metrics) = cx.req_object(step, "metrics", &p) {
                numeric_map(cx, metrics, &join(&p, "metrics"));
            }
        }
    }
    cx.opt_array(m, "visualizations", "");
    cx.req_string(m, "summary", "");
}

/// Tolerance for the |simulation − real| = difference consistency rule.
pub const DIFFERENCE_TOLERANCE: f64 = 1e-9;

fn evaluation(cx: &mut Ctx, doc: &Value) {
    let Some(m) = cx.object(doc, "") else { return };
    if let Some(overall) = cx.req_object(m, "overall_evaluation", "") {
        cx.unit_score(overall, "score", "overall_evaluation");
        cx.opt_string(overall, "description", "overall_evaluation");
    }
    if let Some(metrics) = cx.req_array(m, "metrics", "") {
        for (p, rec) in cx.object_list(metrics, "metrics") {
            cx.req_string(rec, "name", &p);
            let absolute = rec.get("difference_kind").and_then(Value::as_str) == Some("absolute");
            let nums = ["simulation_value", "real_world_value", "difference"].map(|k| rec.get(k).and_then(Value::as_f64));
            if let (true, [Some(sim), Some(real), Some(diff)]) = (absolute, nums) {
                let expected = (sim - real).abs();
                if (expected - diff).abs() > DIFFERENCE_TOLERANCE * expected.abs().max(1.0) {
                    cx.push(
                        join(&p, "difference"),
                        format!("reported difference {diff} does not match |{sim} - {real}| = {expected}"),
                    );
                }
            }
        }
    }
    for key in ["strengths", "weaknesses", "detailed_comparisons", "recommendations"] {
        cx.opt_array(m, key, "");
    }
}

fn feedback(cx: &mut Ctx, doc: &Value) {
    let Some(m) = cx.object(doc, "") else { return };
    cx.req_string(m, "summary", "");
    if let Some(list) = cx.req_array(m, "critical_issues", "") {
        for (p, issue) in cx.object_list(list, "critical_issues") {
            cx.req_string(issue, "issue", &p);
            cx.opt_string(issue, "impact", &p);
            cx.opt_string(issue, "solution", &p);
            cx.opt_bool(issue, "introduced_by_changes", &p);
        }
    }
    if let Some(list) = cx.opt_array(m, "code_improvements", "") {
        for (p, item) in cx.object_list(list, "code_improvements") {
            cx.req_string(item, "modification", &p);
            cx.opt_string(item, "file", &p);
            cx.opt_string(item, "reason", &p);
            cx.opt_bool(item, "related_to_recent_changes", &p);
        }
    }
    if let Some(list) = cx.opt_array(m, "code_snippets", "") {
        for (p, snip) in cx.object_list(list, "code_snippets") {
            cx.req_string(snip, "before", &p);
            cx.req_string(snip, "after", &p);
            cx.opt_string(snip, "file", &p);
            cx.opt_bool(snip, "addresses_recent_changes", &p);
        }
    }
    if let Some(list) = cx.opt_array(m, "prioritized_actions", "") {
        cx.string_list(list, "prioritized_actions", false);
    }
    cx.opt_array(m, "model_improvements", "");
    cx.opt_array(m, "data_alignment_suggestions", "");
    cx.opt_object(m, "change_analysis", "");
}

fn decision(cx: &mut Ctx, doc: &Value) {
    let Some(m) = cx.object(doc, "") else { return };
    cx.req_bool(m, "continue", "");
    cx.req_string(m, "reason", "");
    if let Some(conv) = cx.req_object(m, "convergence_assessment", "") {
        for key in ["code_quality", "model_accuracy", "overall_convergence"] {
            cx.unit_score(conv, key, "convergence_assessment");
        }
    }
    if let Some(focus) = cx.opt_object(m, "next_iteration_focus", "") {
        cx.opt_string(focus, "primary_focus", "next_iteration_focus");
        if let Some(areas) = cx.opt_array(focus, "specific_areas", "next_iteration_focus") {
            cx.string_list(areas, "next_iteration_focus.specific_areas", false);
        }
    }
    if let Some(adj) = cx.opt_object(m, "agent_adjustments", "") {
        for (agent, entry) in adj {
            let p = join("agent_adjustments", agent);
            if !ADJUSTABLE_AGENTS.contains(&agent.as_str()) {
                cx.push(p.clone(), format!("{agent:?} is not an adjustable agent"));
            }
            if let Some(e) = cx.object(entry, &p) {
                cx.req_bool(e, "adjust", &p);
                cx.opt_string(e, "adjustments", &p);
            }
        }
    }
}

fn fix_log(cx: &mut Ctx, doc: &Value) {
    let Some(m) = cx.object(doc, "") else { return };
    for (key, entries) in m {
        let valid_key = key
            .strip_prefix("iteration_")
            .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()));
        if !valid_key {
            cx.push(key.clone(), "key must look like iteration_<N>");
        }
        let Some(list) = cx.array(entries, key) else { continue };
        let mut seen = HashSet::new();
        for (p, entry) in cx.object_list(list, key) {
            let issue = cx.req_string(entry, "issue", &p);
            if let Some(issue) = issue {
                if issue.trim().is_empty() {
                    cx.push(join(&p, "issue"), "issue text must be non-empty");
                } else if !seen.insert(issue.to_string()) {
                    cx.push(join(&p, "issue"), "duplicate issue text within the iteration");
                }
            }
            let status = cx.req_string(entry, "status", &p);
            let log = cx.req_string(entry, "fixed_log", &p);
            match (status, log) {
                (Some("fixed"), Some(l)) if l.trim().is_empty() => {
                    cx.push(join(&p, "fixed_log"), "a fixed issue requires a non-empty fixed_log")
                }
                (Some("open"), Some(l)) if !l.is_empty() => {
                    cx.push(join(&p, "fixed_log"), "an open issue must have an empty fixed_log")
                }
                (Some("fixed" | "open"), _) => {}
                (Some(s), _) => cx.push(join(&p, "status"), format!("{s:?} is not one of open, fixed")),
                (None, _) => {}
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn decision_doc() -> Value {
        json!({
            "continue": false,
            "reason": "done",
            "convergence_assessment": {"code_quality": 1.0, "model_accuracy": 1.0, "overall_convergence": 1.0},
            "next_iteration_focus": {"primary_focus": "both", "specific_areas": []},
            "agent_adjustments": {"code_generation": {"adjust": false, "adjustments": ""}}
        })
    }

    #[test]
    fn conforming_decision_is_clean() {
        assert!(validate_artifact(ArtifactKind::IterationDecision, &decision_doc()).is_empty());
    }

    #[test]
    fn score_out_of_bounds_is_located() {
        let mut d = decision_doc();
        d["convergence_assessment"]["code_quality"] = json!(1.7);
        let r = validate_artifact(ArtifactKind::IterationDecision, &d);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].path, "convergence_assessment.code_quality");
        assert!(r.violations[0].message.contains("[0,1]"));
    }

    #[test]
    fn integer_scores_are_accepted() {
        let mut d = decision_doc();
        d["convergence_assessment"]["code_quality"] = json!(1);
        assert!(validate_artifact(ArtifactKind::IterationDecision, &d).is_empty());
    }

    #[test]
    fn unknown_agent_adjustment_is_rejected() {
        let mut d = decision_doc();
        d["agent_adjustments"]["oracle"] = json!({"adjust": true, "adjustments": "x"});
        assert!(validate_artifact(ArtifactKind::IterationDecision, &d).has_path("agent_adjustments.oracle"));
    }

    #[test]
    fn fix_log_pairs_status_with_log() {
        let doc = json!({"iteration_0": [
            {"issue": "a", "status": "fixed", "fixed_log": ""},
            {"issue": "b", "status": "open", "fixed_log": "x"},
            {"issue": "b", "status": "done", "fixed_log": ""}
        ]});
        let r = validate_artifact(ArtifactKind::FixLog, &doc);
        assert!(r.has_path("iteration_0[0].fixed_log"));
        assert!(r.has_path("iteration_0[1].fixed_log"));
        assert!(r.has_path("iteration_0[2].issue"));
        assert!(r.has_path("iteration_0[2].status"));
        assert_eq!(r.violations.len(), 4);
    }

    #[test]
    fn verification_rules() {
        let doc = json!({
            "passed": true,
            "summary": "",
            "issues": [{"type": "logic", "severity": "urgent", "description": "", "location": "", "solution": ""}],
            "suggestions": [],
            "verification_details": {
                "syntax_check": false, "imports_check": true, "implementation_check": true,
                "logic_check": true, "error_handling_check": true, "performance_check": true
            }
        });
        let r = validate_artifact(ArtifactKind::VerificationResult, &doc);
        assert!(r.has_path("issues[0].severity"));
        assert!(r.has_path("verification_details.syntax_check"));
    }

    #[test]
    fn simulation_rules() {
        let doc = json!({
            "execution_status": "success",
            "runtime_errors": [{"error_type": "X", "message": "m", "location": ""}],
            "performance_metrics": {"execution_time": 1, "memory_usage": null},
            "simulation_metrics": {"rate": "high"},
            "time_series_data": [{"time_step": 2, "metrics": {}}, {"time_step": 2, "metrics": {}}],
            "visualizations": [],
            "summary": ""
        });
        let r = validate_artifact(ArtifactKind::SimulationResult, &doc);
        assert!(r.has_path("runtime_errors"));
        assert!(r.has_path("simulation_metrics.rate"));
        assert!(r.has_path("time_series_data[1].time_step"));
        assert_eq!(r.violations.len(), 3);
    }

    #[test]
    fn evaluation_difference_consistency() {
        let mut doc = json!({
            "overall_evaluation": {"score": 0.5, "description": ""},
            "metrics": [{"name": "rmse", "simulation_value": 0.6, "real_world_value": 0.4,
                         "difference": 0.2, "difference_kind": "absolute"}]
        });
        assert!(validate_artifact(ArtifactKind::EvaluationResult, &doc).is_empty());
        doc["metrics"][0]["difference"] = json!(0.3);
        assert!(validate_artifact(ArtifactKind::EvaluationResult, &doc).has_path("metrics[0].difference"));
        doc["overall_evaluation"]["score"] = json!(-0.1);
        assert!(validate_artifact(ArtifactKind::EvaluationResult, &doc).has_path("overall_evaluation.score"));
    }

    #[test]
    fn model_plan_behaviors_resolve_to_entities() {
        let doc = json!({
            "model_type": "agent_based",
            "description": "",
            "entities": [{"name": "Person"}],
            "behaviors": [{"name": "wear", "applicable_to": ["Person", "Robot"]}],
            "prediction_period": {"start_day": 39, "end_day": 30}
        });
        let r = validate_artifact(ArtifactKind::ModelPlan, &doc);
        assert!(r.has_path("behaviors[0].applicable_to[1]"));
        assert!(r.has_path("prediction_period"));
        assert_eq!(r.violations.len(), 2);
    }

    #[test]
    fn task_spec_entity_names_unique() {
        let doc = json!({
            "title": "t", "description": "d", "simulation_type": "agent_based",
            "entities": [{"name": "A", "attributes": [], "behaviors": []}, {"name": "A"}],
            "evaluation_metrics": ["RMSE", ""]
        });
        let r = validate_artifact(ArtifactKind::TaskSpec, &doc);
        assert!(r.has_path("entities[1].name"));
        assert!(r.has_path("evaluation_metrics[1]"));
    }

    #[test]
    fn relationships_need_two_variables() {
        let doc = json!({
            "data_summary": {"key_patterns": [], "key_distributions": [],
                             "key_relationships": [{"variables": ["age"]}]},
            "simulation_parameters": {},
            "calibration_strategy": {}
        });
        let r = validate_artifact(ArtifactKind::DataAnalysis, &doc);
        assert!(r.has_path("data_summary.key_relationships[0].variables"));
    }

    #[test]
    fn non_object_input_is_reported_not_panicking() {
        for kind in ArtifactKind::ALL {
            for doc in [json!(null), json!(3), json!("x"), json!([1, 2])] {
                let r = validate_artifact(kind, &doc);
                assert_eq!(r.violations.len(), 1, "{kind:?}");
                assert_eq!(r.violations[0].path, "");
            }
        }
    }
}

//! Pipeline artifact documents.
//!
//! Every document is a typed struct whose unknown fields are kept in an
//! `extra` map, so parsing and re-serializing never drops content. Schema
//! rules live in [`validate_artifact`], which works on raw JSON values and
//! reports every violation with its path.

mod validate;

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub use validate::{validate_artifact, ValidationReport, Violation, DIFFERENCE_TOLERANCE};

pub type Extra = Map<String, Value>;

/// Agents whose behavior an iteration decision may ask to adjust.
pub const ADJUSTABLE_AGENTS: [&str; 8] = [
    "task_understanding",
    "data_analysis",
    "model_planning",
    "code_generation",
    "code_verification",
    "simulation_execution",
    "result_evaluation",
    "feedback_generation",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArtifactKind {
    TaskSpec,
    DataAnalysis,
    ModelPlan,
    GeneratedCode,
    VerificationResult,
    SimulationResult,
    EvaluationResult,
    Feedback,
    IterationDecision,
    FixLog,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 10] = [
        ArtifactKind::TaskSpec,
        ArtifactKind::DataAnalysis,
        ArtifactKind::ModelPlan,
        ArtifactKind::GeneratedCode,
        ArtifactKind::VerificationResult,
        ArtifactKind::SimulationResult,
        ArtifactKind::EvaluationResult,
        ArtifactKind::Feedback,
        ArtifactKind::IterationDecision,
        ArtifactKind::FixLog,
    ];

    /// The workflow-state slot (and file stem) holding this kind.
    pub fn slot(self) -> &'static str {
        match self {
            ArtifactKind::TaskSpec => "task_spec",
            ArtifactKind::DataAnalysis => "data_analysis",
            ArtifactKind::ModelPlan => "model_plan",
            ArtifactKind::GeneratedCode => "generated_code",
            ArtifactKind::VerificationResult => "verification_results",
            ArtifactKind::SimulationResult => "simulation_results",
            ArtifactKind::EvaluationResult => "evaluation_results",
            ArtifactKind::Feedback => "feedback",
            ArtifactKind::IterationDecision => "iteration_decision",
            ArtifactKind::FixLog => "fix_log",
        }
    }

    fn type_name(self) -> &'static str {
        match self {
            ArtifactKind::TaskSpec => "TaskSpec",
            ArtifactKind::DataAnalysis => "DataAnalysisReport",
            ArtifactKind::ModelPlan => "ModelPlan",
            ArtifactKind::GeneratedCode => "GeneratedCode",
            ArtifactKind::VerificationResult => "VerificationResult",
            ArtifactKind::SimulationResult => "SimulationResult",
            ArtifactKind::EvaluationResult => "EvaluationResult",
            ArtifactKind::Feedback => "Feedback",
            ArtifactKind::IterationDecision => "IterationDecision",
            ArtifactKind::FixLog => "HistoricalFixLog",
        }
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.type_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown artifact kind {0:?}; expected one of the nine artifact kinds or fix_log")]
pub struct UnknownKind(pub String);

impl FromStr for ArtifactKind {
    type Err = UnknownKind;

    /// Accepts slot names (`verification_results`) and type names (`VerificationResult`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ArtifactKind::ALL
            .into_iter()
            .find(|k| k.slot() == s || k.type_name() == s)
            .ok_or_else(|| UnknownKind(s.to_string()))
    }
}

/// Validates a document whose kind is given by name.
pub fn validate_named(kind: &str, doc: &Value) -> Result<ValidationReport, UnknownKind> {
    Ok(validate_artifact(kind.parse()?, doc))
}

/// Binds a typed document to its artifact kind.
pub trait Artifact: Serialize + DeserializeOwned + Clone + PartialEq + fmt::Debug {
    const KIND: ArtifactKind;

    fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("artifact documents always serialize")
    }

    /// Validates `doc` and then parses it into the typed form.
    fn from_value(doc: Value) -> Result<Self, ArtifactError> {
        let report = validate_artifact(Self::KIND, &doc);
        if !report.is_empty() {
            return Err(ArtifactError::Invalid { kind: Self::KIND, report });
        }
        serde_json::from_value(doc).map_err(|e| ArtifactError::Shape {
            kind: Self::KIND,
            message: e.to_string(),
        })
    }

    fn validate(&self) -> ValidationReport {
        validate_artifact(Self::KIND, &self.to_value())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArtifactError {
    #[error("{kind} failed validation: {report}")]
    Invalid { kind: ArtifactKind, report: ValidationReport },
    #[error("{kind} could not be decoded: {message}")]
    Shape { kind: ArtifactKind, message: String },
}

/// Serializes to JSON text and parses back.
pub fn round_trip<T: Artifact>(doc: &T) -> T {
    let text = to_pretty_json(doc);
    serde_json::from_str(&text).expect("a serialized artifact parses back")
}

/// Pretty JSON with a trailing newline, the on-disk form of every artifact.
pub fn to_pretty_json<T: Serialize + ?Sized>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("artifact documents always serialize");
    s.push('\n');
    s
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionPeriod {
    pub start_day: i64,
    pub end_day: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySpec {
    pub name: String,
    #[serde(default)]
    pub attributes: Vec<String>,
    #[serde(default)]
    pub behaviors: Vec<String>,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFileRef {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub title: String,
    pub description: String,
    pub simulation_type: String,
    pub entities: Vec<EntitySpec>,
    #[serde(default)]
    pub interactions: Vec<Value>,
    #[serde(default)]
    pub parameters: Extra,
    #[serde(default)]
    pub metrics: Vec<Value>,
    #[serde(default)]
    pub validation_criteria: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction_period: Option<PredictionPeriod>,
    #[serde(default)]
    pub evaluation_metrics: Vec<String>,
    /// Data files the task names; filled from the task file when the model omits it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_files: Option<Vec<DataFileRef>>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Artifact for TaskSpec {
    const KIND: ArtifactKind = ArtifactKind::TaskSpec;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relationship {
    pub variables: Vec<String>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Relationship {
    /// Claimed direction: `Some(true)` positive, `Some(false)` negative,
    /// `None` when the record states no direction.
    pub fn claimed_sign(&self) -> Option<bool> {
        let text: String = ["direction", "relationship", "description", "type"]
            .iter()
            .filter_map(|k| self.extra.get(*k).and_then(Value::as_str))
            .collect::<Vec<_>>()
            .join(" ")
            .to_lowercase();
        let neg = ["negative", "inverse", "decreases", "lower"].iter().any(|w| text.contains(w));
        let pos = ["positive", "increases", "higher", "direct"].iter().any(|w| text.contains(w));
        match (pos, neg) {
            (true, false) => Some(true),
            (false, true) => Some(false),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    #[serde(default)]
    pub key_patterns: Vec<Value>,
    #[serde(default)]
    pub key_distributions: Vec<Value>,
    #[serde(default)]
    pub key_relationships: Vec<Relationship>,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataAnalysisReport {
    pub data_summary: DataSummary,
    pub simulation_parameters: Extra,
    pub calibration_strategy: Extra,
    #[serde(default)]
    pub file_summaries: IndexMap<String, String>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Artifact for DataAnalysisReport {
    const KIND: ArtifactKind = ArtifactKind::DataAnalysis;
}

/// Rewrites a report given in the `data_overview` / `calibration_parameters`
/// / `validation_metrics` shape into the `data_summary` /
/// `simulation_parameters` / `calibration_strategy` shape. The original keys
/// are kept alongside. Documents already in the target shape are returned as is.
pub fn normalize_data_analysis(doc: Value) -> Value {
    let Value::Object(mut m) = doc else { return doc };
    let overview_shape = ["data_overview", "calibration_parameters", "validation_metrics"]
        .iter()
        .any(|k| m.contains_key(*k));
    if m.contains_key("data_summary") || !overview_shape {
        return Value::Object(m);
    }
    let overview = m.get("data_overview").cloned().unwrap_or(Value::Null);
    let list = |v: Option<&Value>| v.filter(|x| x.is_array()).cloned().unwrap_or(Value::Array(vec![]));
    let patterns = list(overview.get("observed_patterns").or_else(|| overview.get("key_patterns")));
    let distributions = list(overview.get("key_distributions"));
    let relationships = list(overview.get("key_relationships").or_else(|| m.get("key_relationships")));
    let params = m
        .get("calibration_parameters")
        .filter(|v| v.is_object())
        .cloned()
        .unwrap_or_else(|| Value::Object(Map::new()));
    let calibrated: Vec<Value> = params
        .as_object()
        .map(|p| p.keys().map(|k| Value::String(k.clone())).collect())
        .unwrap_or_default();
    let validation = list(m.get("validation_metrics"));

    let mut summary = Map::new();
    summary.insert("key_patterns".into(), patterns);
    summary.insert("key_distributions".into(), distributions);
    summary.insert("key_relationships".into(), relationships);
    let mut strategy = Map::new();
    strategy.insert("preprocessing_steps".into(), Value::Array(vec![]));
    strategy.insert("calibration_approach".into(), Value::String(String::new()));
    strategy.insert("validation_strategy".into(), validation);
    strategy.insert("key_variables_to_calibrate".into(), Value::Array(calibrated));

    let mut out = Map::new();
    out.insert("data_summary".into(), Value::Object(summary));
    out.insert("simulation_parameters".into(), params);
    out.insert("calibration_strategy".into(), Value::Object(strategy));
    out.append(&mut m);
    Value::Object(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntity {
    pub name: String,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanBehavior {
    pub name: String,
    #[serde(default)]
    pub applicable_to: Vec<String>,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPlan {
    pub model_type: String,
    pub description: String,
    pub entities: Vec<PlanEntity>,
    #[serde(default)]
    pub behaviors: Vec<PlanBehavior>,
    #[serde(default)]
    pub interactions: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<Extra>,
    #[serde(default)]
    pub parameters: Extra,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initialization: Option<Extra>,
    #[serde(default)]
    pub algorithms: Extra,
    #[serde(default)]
    pub data_sources: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_structure: Option<Extra>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction_period: Option<PredictionPeriod>,
    #[serde(default)]
    pub evaluation_metrics: Vec<String>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Artifact for ModelPlan {
    const KIND: ArtifactKind = ArtifactKind::ModelPlan;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeMetadata {
    pub model_type: String,
    pub entities: Vec<String>,
    pub behaviors: Vec<String>,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueSource {
    Quality,
    FeedbackUnimplemented,
    HistoricalRegression,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeIssue {
    pub source: IssueSource,
    pub description: String,
    #[serde(default)]
    pub location: String,
    #[serde(default)]
    pub severity: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfCheckAttempt {
    pub attempt: usize,
    pub issues: Vec<CodeIssue>,
    /// sha256 of the program after this attempt's improvement step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_fingerprint: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Clean,
    AttemptsExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfCheckTrace {
    pub attempts: Vec<SelfCheckAttempt>,
    pub terminated_by: Termination,
    #[serde(default)]
    pub syntax_fix_calls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCode {
    pub code: String,
    pub code_summary: String,
    pub metadata: CodeMetadata,
    /// Set when the program still fails the parse gate after the last attempt.
    #[serde(default, skip_serializing_if = "is_false")]
    pub unresolved_syntax: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub self_check: Option<SelfCheckTrace>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Artifact for GeneratedCode {
    const KIND: ArtifactKind = ArtifactKind::GeneratedCode;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationIssue {
    #[serde(rename = "type", default)]
    pub kind: String,
    pub severity: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub location: String,
    #[serde(default)]
    pub solution: String,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationDetails {
    pub syntax_check: bool,
    pub imports_check: bool,
    pub implementation_check: bool,
    pub logic_check: bool,
    pub error_handling_check: bool,
    pub performance_check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub passed: bool,
    pub summary: String,
    pub issues: Vec<VerificationIssue>,
    #[serde(default)]
    pub suggestions: Vec<Value>,
    pub verification_details: VerificationDetails,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Artifact for VerificationResult {
    const KIND: ArtifactKind = ArtifactKind::VerificationResult;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionStatus {
    Success,
    PartialSuccess,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuntimeError {
    pub error_type: String,
    pub message: String,
    #[serde(default)]
    pub location: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceMetrics {
    pub execution_time: f64,
    pub memory_usage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeStep {
    pub time_step: i64,
    pub metrics: IndexMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub execution_status: ExecutionStatus,
    pub runtime_errors: Vec<RuntimeError>,
    pub performance_metrics: PerformanceMetrics,
    pub simulation_metrics: IndexMap<String, f64>,
    pub time_series_data: Vec<TimeStep>,
    #[serde(default)]
    pub visualizations: Vec<Value>,
    pub summary: String,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Artifact for SimulationResult {
    const KIND: ArtifactKind = ArtifactKind::SimulationResult;
}

impl SimulationResult {
    /// The per-step values of one time-series metric, as `(time_step, value)`.
    pub fn series(&self, metric: &str) -> Vec<(i64, f64)> {
        self.time_series_data
            .iter()
            .filter_map(|s| s.metrics.get(metric).map(|v| (s.time_step, *v)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallEvaluation {
    pub score: f64,
    #[serde(default)]
    pub description: String,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub simulation_value: Value,
    #[serde(default)]
    pub real_world_value: Value,
    #[serde(default)]
    pub difference: Value,
    #[serde(default)]
    pub assessment: Value,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub overall_evaluation: OverallEvaluation,
    pub metrics: Vec<MetricRecord>,
    #[serde(default)]
    pub strengths: Vec<Value>,
    #[serde(default)]
    pub weaknesses: Vec<Value>,
    #[serde(default)]
    pub detailed_comparisons: Vec<Value>,
    #[serde(default)]
    pub recommendations: Vec<Value>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Artifact for EvaluationResult {
    const KIND: ArtifactKind = ArtifactKind::EvaluationResult;
}

impl EvaluationResult {
    pub fn metric(&self, name: &str) -> Option<&MetricRecord> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalIssue {
    pub issue: String,
    #[serde(default)]
    pub impact: String,
    #[serde(default)]
    pub solution: String,
    #[serde(default)]
    pub introduced_by_changes: bool,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeImprovement {
    #[serde(default)]
    pub file: String,
    pub modification: String,
    #[serde(default)]
    pub reason: String,
    #[serde(default)]
    pub related_to_recent_changes: bool,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSnippet {
    #[serde(default)]
    pub file: String,
    pub before: String,
    pub after: String,
    #[serde(default)]
    pub addresses_recent_changes: bool,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub summary: String,
    pub critical_issues: Vec<CriticalIssue>,
    #[serde(default)]
    pub model_improvements: Vec<Value>,
    #[serde(default)]
    pub code_improvements: Vec<CodeImprovement>,
    #[serde(default)]
    pub data_alignment_suggestions: Vec<Value>,
    #[serde(default)]
    pub prioritized_actions: Vec<String>,
    #[serde(default)]
    pub additional_comments: Value,
    #[serde(default)]
    pub code_snippets: Vec<CodeSnippet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub change_analysis: Option<Value>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Artifact for Feedback {
    const KIND: ArtifactKind = ArtifactKind::Feedback;
}

/// Marker prefixed to the summary of a placeholder feedback document.
pub const PLACEHOLDER_FEEDBACK_MARKER: &str = "[placeholder feedback]";

impl Feedback {
    /// The document used when the feedback response cannot be used.
    pub fn placeholder(reason: &str) -> Self {
        Feedback {
            summary: format!("{PLACEHOLDER_FEEDBACK_MARKER} {reason}"),
            critical_issues: Vec::new(),
            model_improvements: Vec::new(),
            code_improvements: Vec::new(),
            data_alignment_suggestions: Vec::new(),
            prioritized_actions: Vec::new(),
            additional_comments: Value::String(String::new()),
            code_snippets: Vec::new(),
            change_analysis: None,
            extra: Extra::new(),
        }
    }

    pub fn is_placeholder(&self) -> bool {
        self.summary.starts_with(PLACEHOLDER_FEEDBACK_MARKER)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceAssessment {
    pub code_quality: f64,
    pub model_accuracy: f64,
    pub overall_convergence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextIterationFocus {
    #[serde(default)]
    pub primary_focus: String,
    #[serde(default)]
    pub specific_areas: Vec<String>,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentAdjustment {
    pub adjust: bool,
    #[serde(default)]
    pub adjustments: String,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDecision {
    #[serde(rename = "continue")]
    pub should_continue: bool,
    pub reason: String,
    pub convergence_assessment: ConvergenceAssessment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_iteration_focus: Option<NextIterationFocus>,
    #[serde(default)]
    pub agent_adjustments: IndexMap<String, AgentAdjustment>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Artifact for IterationDecision {
    const KIND: ArtifactKind = ArtifactKind::IterationDecision;
}

pub const DECISION_FALLBACK_REASON: &str = "decision-parse-fallback";

impl IterationDecision {
    /// Used when the decision response cannot be parsed: keep going and let
    /// the hard iteration limit bound the run.
    pub fn fallback() -> Self {
        IterationDecision {
            should_continue: true,
            reason: DECISION_FALLBACK_REASON.to_string(),
            convergence_assessment: ConvergenceAssessment {
                code_quality: 0.0,
                model_accuracy: 0.0,
                overall_convergence: 0.0,
            },
            next_iteration_focus: None,
            agent_adjustments: IndexMap::new(),
            extra: Extra::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixStatus {
    Open,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixLogEntry {
    pub issue: String,
    pub status: FixStatus,
    #[serde(default)]
    pub fixed_log: String,
}

impl FixLogEntry {
    pub fn open(issue: impl Into<String>) -> Self {
        FixLogEntry {
            issue: issue.into(),
            status: FixStatus::Open,
            fixed_log: String::new(),
        }
    }
}

/// Issues recorded per iteration key (`iteration_<N>`), in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HistoricalFixLog(pub IndexMap<String, Vec<FixLogEntry>>);

impl Artifact for HistoricalFixLog {
    const KIND: ArtifactKind = ArtifactKind::FixLog;
}

impl HistoricalFixLog {
    pub fn key(iteration: usize) -> String {
        format!("iteration_{iteration}")
    }

    pub fn is_empty(&self) -> bool {
        self.0.values().all(Vec::is_empty)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &FixLogEntry)> {
        self.0.iter().flat_map(|(k, v)| v.iter().map(move |e| (k.as_str(), e)))
    }

    pub fn open_count(&self) -> usize {
        self.entries().filter(|(_, e)| e.status == FixStatus::Open).count()
    }

    pub fn fixed_count(&self) -> usize {
        self.entries().filter(|(_, e)| e.status == FixStatus::Fixed).count()
    }

    /// Sub-log holding only entries with `status`, keeping empty keys out.
    pub fn filtered(&self, status: FixStatus) -> HistoricalFixLog {
        HistoricalFixLog(
            self.0
                .iter()
                .filter_map(|(k, v)| {
                    let kept: Vec<_> = v.iter().filter(|e| e.status == status).cloned().collect();
                    (!kept.is_empty()).then(|| (k.clone(), kept))
                })
                .collect(),
        )
    }
}

//! Offline fixtures for the mask-adoption task: the task file, canned
//! programs, a scripted model that plays every agent, the synthetic dataset
//! and the recorded replay transcript.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde_json::{json, Value};
use simforge_core::agent::llm::{RecordingBackend, ScriptedBackend};
use simforge_core::agent::{AgentRuntime, LlmRequest};
use simforge_core::workflow::{run_workflow, BackendMode, RunConfig, WorkflowError, WorkflowOutcome};
use simforge_testbed::{
    emit_dataset, generate_population, simulate_adoption, AdoptionParams, DatasetFiles, TestbedError,
    DEFAULT_TRAIN_END_DAY,
};

pub const TASK: &str = include_str!("../fixtures/task.md");
/// Carries the last training-day rate forward.
pub const BASELINE_PROGRAM: &str = include_str!("../fixtures/baseline.py");
/// Copies `ground_truth.csv` into `results.csv`.
pub const EXACT_PROGRAM: &str = include_str!("../fixtures/exact.py");

pub const AGENTS: usize = 100;
pub const SEED: u64 = 7;
pub const HORIZON_DAYS: u32 = 40;
/// Iterations in the bundled transcript.
pub const TRANSCRIPT_ITERATIONS: usize = 3;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn transcript_path() -> PathBuf {
    fixtures_dir().join("transcript.jsonl")
}

/// Writes the 100-agent, 40-day dataset into `dir`.
pub fn write_dataset(dir: &Path) -> Result<DatasetFiles, TestbedError> {
    let pop = generate_population(AGENTS, SEED);
    let records = simulate_adoption(&pop, &AdoptionParams::default(), HORIZON_DAYS, SEED)?;
    emit_dataset(&pop, &records, dir, DEFAULT_TRAIN_END_DAY)
}

/// What the scripted model does in each iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskScript {
    /// Iteration whose decision stops the run; `None` always continues.
    pub stop_at: Option<usize>,
    /// Iterations whose verification review fails.
    pub failing_verification: Vec<usize>,
    /// First iteration that generates the exact program.
    pub exact_from: usize,
}

impl Default for MaskScript {
    fn default() -> Self {
        MaskScript {
            stop_at: Some(TRANSCRIPT_ITERATIONS - 1),
            failing_verification: Vec::new(),
            exact_from: 1,
        }
    }
}

pub fn critical_issue(iteration: usize) -> String {
    format!("Iteration {iteration}: predicted rates ignore the post-intervention trend")
}

pub fn improvement(iteration: usize) -> String {
    format!("Iteration {iteration}: derive the daily rate from observed adoption dynamics")
}

/// An issue text the fix-check reply invents; it must never reach the log.
pub const FOREIGN_ISSUE: &str = "Unreported problem with the random seed";

fn fenced(code: &str) -> String {
    format!("Here is the program.\n\n```python\n{code}```\n")
}

#[derive(Default)]
struct Cursor {
    iteration: usize,
    calls: HashMap<String, usize>,
}

/// Plays every agent of the pipeline for the mask task.
pub struct MaskResponder {
    script: MaskScript,
    cursor: Mutex<Cursor>,
}

impl MaskResponder {
    pub fn new(script: MaskScript) -> Self {
        MaskResponder {
            script,
            cursor: Mutex::new(Cursor::default()),
        }
    }

    pub fn into_backend(self) -> ScriptedBackend {
        let me = Arc::new(self);
        ScriptedBackend::new(move |req| Ok(me.respond(req)))
    }

    fn program(&self, iteration: usize) -> &'static str {
        if iteration >= self.script.exact_from {
            EXACT_PROGRAM
        } else {
            BASELINE_PROGRAM
        }
    }

    pub fn respond(&self, req: &LlmRequest) -> String {
        let mut cur = self.cursor.lock().expect("cursor lock");
        let label = req.agent_name.as_str();
        let it = cur.iteration;
        let nth = {
            let n = cur.calls.entry(label.to_string()).or_default();
            *n += 1;
            *n
        };
        let reply = match label {
            "task_understanding" => task_spec(),
            "data_analysis.semantic_summary" => semantic_summary(&req.prompt),
            "data_analysis.integrity_check" => json!({"findings": []}).to_string(),
            "data_analysis" => data_analysis(),
            "model_planning" => model_plan(),
            "code_generation" => fenced(self.program(it)),
            // The first review of the first program asks for one change.
            "code_generation.quality_check" if it == 0 && nth == 1 => json!({"issues": [{
                "description": "The prediction window is hard-coded without explanation",
                "location": "main", "severity": "Low"
            }]})
            .to_string(),
            "code_generation.quality_check"
            | "code_generation.feedback_check"
            | "code_generation.historical_check" => json!({"issues": []}).to_string(),
            "code_generation.improve" | "code_generation.fix_syntax" => fenced(self.program(it)),
            "code_verification" => verification(!self.script.failing_verification.contains(&it)),
            "result_evaluation" => evaluation(it),
            "feedback_generation.fix_check" => fix_check(it),
            "feedback_generation" => feedback(it),
            "iteration_control" => {
                let stop = self.script.stop_at == Some(it);
                cur.iteration += 1;
                cur.calls.clear();
                decision(it, !stop)
            }
            other => format!("no scripted reply for {other}"),
        };
        reply
    }
}

fn task_spec() -> String {
    json!({
        "title": "Mask adoption through social networks",
        "description": "Predict the daily share of agents wearing masks over days 30 to 39 from attributes, multi-layer social ties and a day-10 information campaign.",
        "simulation_type": "agent_based",
        "entities": [{
            "name": "Person",
            "attributes": ["age", "occupation", "risk_perception", "initial_mask_wearing"],
            "behaviors": ["wear_mask", "share_information"]
        }],
        "interactions": [{"name": "social_influence", "description": "Neighbours' mask wearing shifts adoption probability"}],
        "parameters": {"intervention_day": 10},
        "prediction_period": {"start_day": 30, "end_day": 39},
        "evaluation_metrics": ["RMSE", "Peak Adoption Rate Error", "Time-to-Peak Error"]
    })
    .to_string()
}

fn semantic_summary(prompt: &str) -> String {
    let file = ["agent_attributes.csv", "social_network.json", "train_data.csv"]
        .into_iter()
        .find(|f| prompt.contains(f))
        .unwrap_or("the file");
    format!("{file} holds inputs for the mask adoption model; values look consistent with the task description.")
}

fn data_analysis() -> String {
    json!({
        "data_summary": {
            "key_patterns": [{"name": "Campaign uptake", "description": "Adoption rises after day 10"}],
            "key_distributions": [{"name": "risk_perception", "description": "Spread over [0, 1]"}],
            "key_relationships": [{
                "variables": ["risk_perception", "initial_mask_wearing"],
                "direction": "positive",
                "description": "Higher perceived risk goes with wearing a mask from the start"
            }]
        },
        "simulation_parameters": {"influence_weight": {"value": 0.4}},
        "calibration_strategy": {"key_variables_to_calibrate": ["influence_weight"], "target": "train_data.csv daily rate"}
    })
    .to_string()
}

fn model_plan() -> String {
    json!({
        "model_type": "agent_based",
        "description": "Agents decide daily whether to wear a mask from their risk perception and their neighbours' behaviour.",
        "entities": [{"name": "Person", "attributes": ["risk_perception", "wearing_mask"]}],
        "behaviors": [{"name": "wear_mask", "applicable_to": ["Person"]}],
        "interactions": [{"name": "social_influence"}],
        "parameters": {"influence_weight": 0.4},
        "algorithms": {"decision": "threshold on weighted neighbour share"},
        "prediction_period": {"start_day": 30, "end_day": 39},
        "evaluation_metrics": ["RMSE"]
    })
    .to_string()
}

fn verification(passed: bool) -> String {
    let issues = if passed {
        json!([])
    } else {
        json!([{
            "type": "logic",
            "severity": "High",
            "description": "Forecast ignores the social network entirely",
            "solution": "Use neighbour behaviour when predicting adoption"
        }])
    };
    json!({
        "passed": passed,
        "summary": if passed { "The program reads the data and writes results.csv." } else { "The model logic does not match the plan." },
        "issues": issues,
        "suggestions": [],
        "verification_details": {
            "syntax_check": true, "imports_check": true, "implementation_check": true,
            "logic_check": passed, "error_handling_check": true, "performance_check": true
        }
    })
    .to_string()
}

fn evaluation(iteration: usize) -> String {
    json!({
        "overall_evaluation": {"score": if iteration == 0 { 0.4 } else { 0.9 }, "description": "Comparison of predicted and observed adoption."},
        "metrics": [
            {"name": "RMSE", "description": "model-reported estimate", "simulation_value": 0.1, "real_world_value": 0.0},
            {"name": "Trend agreement", "description": "Qualitative", "assessment": "reasonable"}
        ],
        "strengths": ["Reads the provided data"],
        "weaknesses": ["No explicit network dynamics"],
        "recommendations": ["Model neighbour influence"]
    })
    .to_string()
}

fn feedback(iteration: usize) -> String {
    json!({
        "summary": format!("Review of iteration {iteration}."),
        "critical_issues": [{
            "issue": critical_issue(iteration),
            "impact": "Peak timing is missed",
            "solution": "Use the daily adoption trend"
        }],
        "model_improvements": [],
        "code_improvements": [{
            "file": "simulation.py",
            "modification": improvement(iteration),
            "reason": "Better calibration"
        }],
        "prioritized_actions": ["Calibrate against training days"],
        "additional_comments": ""
    })
    .to_string()
}

/// Marks the previous iteration's entries fixed, tries to reopen older
/// ones and invents one foreign issue; only the first part is acceptable.
fn fix_check(iteration: usize) -> String {
    let mut reply = serde_json::Map::new();
    if let Some(prev) = iteration.checked_sub(1) {
        reply.insert(
            format!("iteration_{prev}"),
            json!([
                {"issue": critical_issue(prev), "status": "fixed", "fixed_log": format!("Iteration {iteration} reads the observed curve")},
                {"issue": improvement(prev), "status": "fixed", "fixed_log": "Rates now come from the data"},
                {"issue": FOREIGN_ISSUE, "status": "fixed", "fixed_log": "seeded"}
            ]),
        );
    }
    if let Some(older) = iteration.checked_sub(2) {
        reply.insert(
            format!("iteration_{older}"),
            json!([{"issue": critical_issue(older), "status": "open", "fixed_log": ""}]),
        );
    }
    Value::Object(reply).to_string()
}

fn decision(iteration: usize, cont: bool) -> String {
    json!({
        "continue": cont,
        "reason": if cont { format!("Iteration {iteration} can still improve") } else { format!("Iteration {iteration} matches the reference") },
        "convergence_assessment": {"code_quality": 0.8, "model_accuracy": if cont { 0.5 } else { 0.95 }, "overall_convergence": if cont { 0.6 } else { 0.9 }},
        "next_iteration_focus": {"primary_focus": "calibration", "specific_areas": ["peak timing"]},
        "agent_adjustments": {}
    })
    .to_string()
}

/// The run configuration used for the bundled transcript.
pub fn replay_config(data_dir: &Path, transcript: &Path, max_iterations: usize) -> RunConfig {
    let mut cfg = RunConfig {
        task_description: TASK.to_string(),
        data_dir: Some(data_dir.to_path_buf()),
        max_iterations,
        timeout_seconds: 60,
        ground_truth: Some(data_dir.join("ground_truth.csv")),
        reproducible: true,
        ..RunConfig::default()
    };
    cfg.backend.mode = BackendMode::Replay;
    cfg.backend.transcript = Some(transcript.to_path_buf());
    cfg
}

/// Runs the workflow against the scripted model, appending every exchange
/// to `transcript` (which is truncated first).
pub fn record_run(
    script: MaskScript,
    data_dir: &Path,
    out_dir: &Path,
    transcript: &Path,
    max_iterations: usize,
) -> Result<WorkflowOutcome, WorkflowError> {
    std::fs::write(transcript, "").map_err(|source| WorkflowError::Io {
        path: transcript.to_path_buf(),
        source,
    })?;
    let backend = RecordingBackend::new(MaskResponder::new(script).into_backend(), transcript)?;
    let rt = AgentRuntime::new(Arc::new(backend));
    let mut cfg = replay_config(data_dir, transcript, max_iterations);
    cfg.backend.mode = BackendMode::Record;
    run_workflow(&rt, &cfg, out_dir)
}

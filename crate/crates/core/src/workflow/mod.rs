//! The iteration loop: stage graph, budgets, persistence and resume.

mod config;
mod groundtruth;
mod persist;
mod resume;
mod taskfile;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use simforge_metrics::RateSeries;
use thiserror::Error;

use crate::agent::{evaluate_results, plan_model, understand_task, AgentError, AgentRuntime, LlmError};
use crate::artifacts::{
    DataAnalysisReport, EvaluationResult, Feedback, GeneratedCode, HistoricalFixLog, IterationDecision, ModelPlan,
    SimulationResult, TaskSpec, VerificationResult,
};
use crate::data::{analyze, AnalyzeError, AnalyzeOptions};
use crate::feedback::{generate_feedback, iteration_decision, update_fix_log, DecisionInputs, FeedbackInputs};
use crate::forge::{generate_code, GenerationInputs};
use crate::sandbox::{run_simulation, verify, RunOptions, SandboxConfig};

pub use config::{BackendMode, BackendSpec, RunConfig};
pub use groundtruth::{augment, load_reference, rate_metrics, RATE_METRIC};
pub use persist::{
    code_rel_path, iter_dir, iter_dir_name, iteration_dirs, read_json, save_artifact, save_code, save_raw,
    FINAL_STATE, FIX_LOG, ITERATION_META, RUN_CONFIG, SIM_OUTPUT,
};
pub use resume::{resume, ResumePoint};
pub use taskfile::{parse_task_file, TaskFile};

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot resume from {}: {message}", path.display())]
    Resume { path: PathBuf, message: String },
    #[error("model backend: {0}")]
    Backend(#[from] LlmError),
}

/// Agent outputs of the latest iteration, one slot per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkflowState {
    pub task_spec: Option<TaskSpec>,
    pub data_analysis: Option<DataAnalysisReport>,
    pub model_plan: Option<ModelPlan>,
    pub generated_code: Option<GeneratedCode>,
    pub verification_results: Option<VerificationResult>,
    pub simulation_results: Option<SimulationResult>,
    pub evaluation_results: Option<EvaluationResult>,
    pub feedback: Option<Feedback>,
    pub iteration_decision: Option<IterationDecision>,
}

/// Program text by iteration.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CodeMemory(pub BTreeMap<usize, String>);

impl CodeMemory {
    pub fn get(&self, iteration: usize) -> Option<&str> {
        self.0.get(&iteration).map(String::as_str)
    }

    pub fn insert(&mut self, iteration: usize, code: String) {
        self.0.insert(iteration, code);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub const INITIAL_SOFT_LIMIT: usize = 3;
pub const SOFT_LIMIT_STEP: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationBudget {
    pub max_iterations: usize,
    pub soft_iteration_limit: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoftLimitEvent {
    /// Completed iterations when the limit was raised.
    pub after_iteration: usize,
    pub from: usize,
    pub to: usize,
}

impl IterationBudget {
    pub fn new(max_iterations: usize) -> Self {
        IterationBudget {
            max_iterations,
            soft_iteration_limit: INITIAL_SOFT_LIMIT.min(max_iterations),
        }
    }

    pub fn extend_soft_limit(self) -> Self {
        IterationBudget {
            soft_iteration_limit: (self.soft_iteration_limit + SOFT_LIMIT_STEP).min(self.max_iterations),
            ..self
        }
    }

    /// Raises the soft limit once `completed` iterations have reached it.
    pub fn after_iteration(&mut self, completed: usize) -> Option<SoftLimitEvent> {
        if completed < self.soft_iteration_limit || self.soft_iteration_limit >= self.max_iterations {
            return None;
        }
        let next = self.extend_soft_limit();
        let event = SoftLimitEvent {
            after_iteration: completed,
            from: self.soft_iteration_limit,
            to: next.soft_iteration_limit,
        };
        tracing::info!(to = event.to, "extending soft iteration limit");
        *self = next;
        Some(event)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopReason {
    /// The iteration decision asked to stop.
    Decision { reason: String },
    MaxIterations,
    StageFailure {
        iteration: usize,
        stage: String,
        message: String,
    },
}

impl StopReason {
    pub fn is_failure(&self) -> bool {
        matches!(self, StopReason::StageFailure { .. })
    }
}

/// Bookkeeping written after each iteration; its presence marks the
/// iteration complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMeta {
    pub iteration: usize,
    pub skipped_initial: bool,
    /// Model calls made during the iteration.
    pub llm_calls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowOutcome {
    /// Relative to the run directory.
    pub final_code_path: Option<PathBuf>,
    pub final_evaluation: Option<EvaluationResult>,
    pub iterations_run: usize,
    pub stop_reason: StopReason,
    pub budget: IterationBudget,
    pub soft_limit_events: Vec<SoftLimitEvent>,
}

#[derive(Serialize)]
struct FinalState<'a> {
    #[serde(flatten)]
    outcome: &'a WorkflowOutcome,
    state: &'a WorkflowState,
}

/// Mutable run state carried between iterations.
#[derive(Debug, Clone, Default)]
pub struct Progress {
    pub state: WorkflowState,
    pub code_memory: CodeMemory,
    pub fix_log: HistoricalFixLog,
    /// Index of the next iteration to run.
    pub next_iteration: usize,
    pub soft_limit_events: Vec<SoftLimitEvent>,
}

/// A stage that could not produce its artifact.
#[derive(Debug)]
struct StageFailure {
    stage: &'static str,
    message: String,
    raw: Option<String>,
}

enum IterationError {
    Stage(StageFailure),
    Fatal(WorkflowError),
}

impl From<WorkflowError> for IterationError {
    fn from(e: WorkflowError) -> Self {
        IterationError::Fatal(e)
    }
}

fn agent_failure(stage: &'static str) -> impl FnOnce(AgentError) -> IterationError {
    move |e| {
        IterationError::Stage(StageFailure {
            stage,
            raw: e.raw_response().map(str::to_string),
            message: e.to_string(),
        })
    }
}

fn missing(stage: &'static str) -> IterationError {
    IterationError::Stage(StageFailure {
        stage,
        message: format!("no {stage} in state to reuse"),
        raw: None,
    })
}

pub struct Workflow<'a> {
    rt: &'a AgentRuntime,
    cfg: &'a RunConfig,
    out: PathBuf,
    task: TaskFile,
    sandbox: SandboxConfig,
    reference: Option<RateSeries>,
}

impl<'a> Workflow<'a> {
    pub fn new(rt: &'a AgentRuntime, cfg: &'a RunConfig, out: &Path) -> Result<Self, WorkflowError> {
        cfg.validate().map_err(WorkflowError::Config)?;
        let reference = match &cfg.ground_truth {
            Some(p) => Some(load_reference(p).map_err(WorkflowError::Config)?),
            None => None,
        };
        Ok(Workflow {
            rt,
            cfg,
            out: out.to_path_buf(),
            task: parse_task_file(&cfg.task_description),
            sandbox: cfg.sandbox(),
            reference,
        })
    }

    pub fn out(&self) -> &Path {
        &self.out
    }

    /// Starts a fresh run. The directory must not hold an earlier run.
    pub fn run(&self) -> Result<WorkflowOutcome, WorkflowError> {
        fs::create_dir_all(&self.out).map_err(persist::io_err(&self.out))?;
        if self.out.join(RUN_CONFIG).exists() || !iteration_dirs(&self.out)?.is_empty() {
            return Err(WorkflowError::Config(format!(
                "{} already holds a run; resume it or choose another directory",
                self.out.display()
            )));
        }
        persist::write_json(&self.out.join(RUN_CONFIG), self.cfg)?;
        self.continue_from(Progress::default())
    }

    /// Runs iterations from `progress.next_iteration` until a stop condition.
    pub fn continue_from(&self, mut p: Progress) -> Result<WorkflowOutcome, WorkflowError> {
        let max = self.cfg.max_iterations;
        let mut budget = IterationBudget::new(max);
        for done in 1..=p.next_iteration {
            budget.after_iteration(done);
        }
        // A run that already stopped by decision stays stopped.
        let mut stop = p
            .state
            .iteration_decision
            .as_ref()
            .filter(|d| p.next_iteration > 0 && !d.should_continue)
            .map(|d| StopReason::Decision { reason: d.reason.clone() });
        while stop.is_none() && p.next_iteration < max {
            let i = p.next_iteration;
            tracing::info!("starting iteration {}/{}", i + 1, max);
            let calls_before = self.rt.calls();
            let skipped_initial = match self.run_single_iteration(i, &mut p) {
                Ok(skipped) => skipped,
                Err(IterationError::Fatal(e)) => return Err(e),
                Err(IterationError::Stage(f)) => {
                    tracing::error!(iteration = i, stage = f.stage, error = %f.message, "stage failed; aborting run");
                    if let Some(raw) = &f.raw {
                        save_raw(&self.out, f.stage, i, raw)?;
                    }
                    stop = Some(StopReason::StageFailure {
                        iteration: i,
                        stage: f.stage.to_string(),
                        message: f.message,
                    });
                    break;
                }
            };
            let meta = IterationMeta {
                iteration: i,
                skipped_initial,
                llm_calls: self.rt.calls() - calls_before,
            };
            save_artifact(&self.out, "iteration_meta", i, &meta)?;
            persist::write_json(&self.out.join(FIX_LOG), &p.fix_log)?;
            p.next_iteration += 1;
            let decision = p.state.iteration_decision.as_ref();
            if let Some(d) = decision.filter(|d| !d.should_continue) {
                tracing::info!("stopping after {} iterations: {}", i + 1, d.reason);
                stop = Some(StopReason::Decision { reason: d.reason.clone() });
                break;
            }
            p.soft_limit_events.extend(budget.after_iteration(p.next_iteration));
        }
        let outcome = self.outcome(&p, budget, stop.unwrap_or(StopReason::MaxIterations));
        persist::write_json(
            &self.out.join(FINAL_STATE),
            &FinalState {
                outcome: &outcome,
                state: &p.state,
            },
        )?;
        Ok(outcome)
    }

    fn outcome(&self, p: &Progress, budget: IterationBudget, stop_reason: StopReason) -> WorkflowOutcome {
        let last_code = p.code_memory.0.keys().next_back().copied();
        WorkflowOutcome {
            final_code_path: last_code.map(|i| code_rel_path(i, &self.cfg.code_suffix)),
            final_evaluation: p.state.evaluation_results.clone(),
            iterations_run: p.next_iteration,
            stop_reason,
            budget,
            soft_limit_events: p.soft_limit_events.clone(),
        }
    }

    fn save<T: Serialize>(&self, slot: &str, i: usize, doc: &T) -> Result<(), WorkflowError> {
        save_artifact(&self.out, slot, i, doc).map(|_| ())
    }

    /// One pass of the stage graph. Returns whether the initial stages were
    /// skipped because the previous iteration produced no simulation results.
    fn run_single_iteration(&self, i: usize, p: &mut Progress) -> Result<bool, IterationError> {
        let rt = self.rt;
        let data_dir = self.cfg.data_dir.as_deref();
        let skip_initial = i > 0 && p.state.simulation_results.is_none();
        let st = &mut p.state;

        if skip_initial {
            tracing::info!(iteration = i, "skipping initial steps due to previous failure");
        } else {
            let mut spec = understand_task(rt, &self.task.text).map_err(agent_failure("task_spec"))?;
            if spec.data_files.is_none() {
                spec.data_files = self.task.data_file_refs();
            }
            self.save("task_spec", i, &spec)?;
            st.task_spec = Some(spec);
            st.data_analysis = match data_dir {
                Some(dir) => {
                    let opts = AnalyzeOptions {
                        llm_integrity: self.cfg.llm_integrity,
                    };
                    let outcome = analyze(rt, dir, st.task_spec.as_ref().expect("set above"), opts).map_err(|e| {
                        let raw = match &e {
                            AnalyzeError::Agent(a) => a.raw_response().map(str::to_string),
                            _ => None,
                        };
                        IterationError::Stage(StageFailure {
                            stage: "data_analysis",
                            message: e.to_string(),
                            raw,
                        })
                    })?;
                    self.save("data_analysis", i, &outcome.report)?;
                    Some(outcome.report)
                }
                None => None,
            };
            let plan = plan_model(rt, st.task_spec.as_ref().expect("set above"), st.data_analysis.as_ref())
                .map_err(agent_failure("model_plan"))?;
            self.save("model_plan", i, &plan)?;
            st.model_plan = Some(plan);
        }
        let spec = st.task_spec.clone().ok_or_else(|| missing("task_spec"))?;
        let plan = st.model_plan.clone().ok_or_else(|| missing("model_plan"))?;
        let analysis = st.data_analysis.clone();

        let prev_code = i.checked_sub(1).and_then(|k| p.code_memory.get(k)).map(str::to_string);
        let inputs = GenerationInputs {
            task_spec: &spec,
            model_plan: &plan,
            data_analysis: analysis.as_ref(),
            feedback: st.feedback.as_ref(),
            previous_code: prev_code.as_deref(),
            fix_log: (!p.fix_log.is_empty()).then_some(&p.fix_log),
        };
        let generated = generate_code(rt, &inputs, &self.sandbox).map_err(|e| {
            IterationError::Stage(StageFailure {
                stage: "generated_code",
                raw: e.source.raw_response().map(str::to_string),
                message: e.to_string(),
            })
        })?;
        self.save("generated_code", i, &generated)?;
        let code_path = save_code(&self.out, i, &self.cfg.code_suffix, &generated.code)?;
        p.code_memory.insert(i, generated.code.clone());
        let code = generated.code.clone();
        st.generated_code = Some(generated);

        let verification =
            verify(rt, &code, &spec, &self.sandbox).map_err(agent_failure("verification_results"))?;
        self.save("verification_results", i, &verification)?;
        let passed = verification.passed;
        st.verification_results = Some(verification);

        if passed {
            let opts = RunOptions {
                reproducible: self.cfg.reproducible,
            };
            let (sim, run) = run_simulation(&code_path, &spec, data_dir, &self.sandbox, opts);
            let export = iter_dir(&self.out, i).join(SIM_OUTPUT);
            run.export_produced(&export).map_err(persist::io_err(&export))?;
            self.save("simulation_results", i, &sim)?;
            let mut eval =
                evaluate_results(rt, &spec, analysis.as_ref(), &sim).map_err(agent_failure("evaluation_results"))?;
            if let Some(reference) = &self.reference {
                augment(&mut eval, &sim, reference);
            }
            self.save("evaluation_results", i, &eval)?;
            st.simulation_results = Some(sim);
            st.evaluation_results = Some(eval);
        } else {
            tracing::warn!(iteration = i, "verification failed; skipping execution and evaluation");
            st.simulation_results = None;
            st.evaluation_results = None;
        }

        let fb_inputs = FeedbackInputs {
            task_spec: &spec,
            verification: st.verification_results.as_ref().expect("set above"),
            simulation: st.simulation_results.as_ref(),
            evaluation: st.evaluation_results.as_ref(),
            current_code: &code,
            previous_code: prev_code.as_deref(),
            iteration: i,
            code_suffix: &self.cfg.code_suffix,
        };
        let fb = generate_feedback(rt, &fb_inputs, &p.fix_log).map_err(agent_failure("feedback"))?;
        self.save("feedback", i, &fb.feedback)?;
        if let Some(raw) = &fb.fallback_raw {
            save_raw(&self.out, "feedback", i, raw)?;
        }
        p.fix_log = update_fix_log(&fb.feedback, &fb.fix_log, i);
        save_artifact(&self.out, "fix_log", i, &p.fix_log)?;
        st.feedback = Some(fb.feedback);

        let d_inputs = DecisionInputs {
            current_iteration: i,
            max_iterations: self.cfg.max_iterations,
            verification: st.verification_results.as_ref().expect("set above"),
            evaluation: st.evaluation_results.as_ref(),
            feedback: st.feedback.as_ref().expect("set above"),
        };
        let (decision, raw) = iteration_decision(rt, &d_inputs).map_err(agent_failure("iteration_decision"))?;
        self.save("iteration_decision", i, &decision)?;
        if let Some(raw) = raw {
            save_raw(&self.out, "iteration_decision", i, &raw)?;
        }
        tracing::info!(iteration = i, r#continue = decision.should_continue, reason = %decision.reason, "iteration decision");
        st.iteration_decision = Some(decision);
        Ok(skip_initial)
    }
}

pub enum Resumed {
    /// The run had already stopped; nothing was executed.
    AlreadyFinished(WorkflowOutcome),
    Continued(WorkflowOutcome),
}

impl Resumed {
    pub fn outcome(&self) -> &WorkflowOutcome {
        match self {
            Resumed::AlreadyFinished(o) | Resumed::Continued(o) => o,
        }
    }
}

/// Continues the run in `out` after its last complete iteration. A replay
/// backend skips the calls those iterations consumed; `transcript`
/// overrides the recorded transcript path for this invocation only.
pub fn resume_workflow(out: &Path, transcript: Option<&Path>) -> Result<Resumed, WorkflowError> {
    let point = resume(out)?;
    let mut cfg = point.config.clone();
    if let Some(t) = transcript {
        cfg.backend.transcript = Some(t.to_path_buf());
    }
    if point.finished {
        tracing::info!(dir = %out.display(), "run already finished; nothing to resume");
        let idle = crate::agent::llm::ScriptedBackend::new(|r| {
            Err(LlmError::Config(format!("no model calls expected, got {}", r.agent_name)))
        });
        let rt = AgentRuntime::new(std::sync::Arc::new(idle));
        return Workflow::new(&rt, &cfg, out)?.continue_from(point.progress).map(Resumed::AlreadyFinished);
    }
    let rt = AgentRuntime::new(cfg.backend.build(point.llm_calls)?);
    Workflow::new(&rt, &cfg, out)?
        .continue_from(point.progress)
        .map(Resumed::Continued)
}

/// Runs a fresh workflow into `out`.
pub fn run_workflow(rt: &AgentRuntime, cfg: &RunConfig, out: &Path) -> Result<WorkflowOutcome, WorkflowError> {
    Workflow::new(rt, cfg, out)?.run()
}

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;

use super::persist::{io_err, iter_dir, iteration_dirs, read_json, ITERATION_META, RUN_CONFIG};
use super::{code_rel_path, IterationBudget, IterationMeta, Progress, RunConfig, WorkflowError, WorkflowState};
use crate::artifacts::{Artifact, HistoricalFixLog};

/// Where an interrupted run picks up.
#[derive(Debug, Clone)]
pub struct ResumePoint {
    pub config: RunConfig,
    pub progress: Progress,
    /// Model calls consumed by the completed iterations.
    pub llm_calls: usize,
    /// The run already stopped: by decision or at the iteration limit.
    pub finished: bool,
}

fn load<T: Artifact + DeserializeOwned>(path: &Path) -> Result<T, WorkflowError> {
    let doc: serde_json::Value = read_json(path)?;
    T::from_value(doc).map_err(|e| WorkflowError::Resume {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn load_opt<T: Artifact + DeserializeOwned>(path: &Path) -> Result<Option<T>, WorkflowError> {
    if path.exists() {
        load(path).map(Some)
    } else {
        Ok(None)
    }
}

/// Rebuilds the state after the last complete iteration. Directories of
/// incomplete iterations are removed so they run again from the start.
pub fn resume(out: &Path) -> Result<ResumePoint, WorkflowError> {
    let cfg_path = out.join(RUN_CONFIG);
    if !cfg_path.exists() {
        return Err(WorkflowError::Resume {
            path: out.to_path_buf(),
            message: format!("no {RUN_CONFIG}; not a run directory"),
        });
    }
    let config: RunConfig = read_json(&cfg_path)?;
    let dirs = iteration_dirs(out)?;
    let completed = dirs
        .iter()
        .enumerate()
        .take_while(|&(k, &n)| k == n && iter_dir(out, n).join(ITERATION_META).exists())
        .count();
    for &n in dirs.iter().filter(|&&n| n >= completed) {
        let dir = iter_dir(out, n);
        tracing::warn!(dir = %dir.display(), "removing incomplete iteration");
        fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
    }

    let mut p = Progress {
        next_iteration: completed,
        ..Progress::default()
    };
    let mut llm_calls = 0;
    let mut budget = IterationBudget::new(config.max_iterations);
    for i in 0..completed {
        let dir = iter_dir(out, i);
        let meta: IterationMeta = read_json(&dir.join(ITERATION_META))?;
        llm_calls += meta.llm_calls;
        let code_path = out.join(code_rel_path(i, &config.code_suffix));
        let code = fs::read_to_string(&code_path).map_err(|e| WorkflowError::Resume {
            path: code_path.clone(),
            message: e.to_string(),
        })?;
        p.code_memory.insert(i, code);

        let st = &mut p.state;
        // Reused slots keep their earlier value when the stages were skipped.
        if !meta.skipped_initial {
            st.task_spec = Some(load(&dir.join("task_spec.json"))?);
            st.data_analysis = load_opt(&dir.join("data_analysis.json"))?;
            st.model_plan = Some(load(&dir.join("model_plan.json"))?);
        }
        *st = WorkflowState {
            generated_code: Some(load(&dir.join("generated_code.json"))?),
            verification_results: Some(load(&dir.join("verification_results.json"))?),
            simulation_results: load_opt(&dir.join("simulation_results.json"))?,
            evaluation_results: load_opt(&dir.join("evaluation_results.json"))?,
            feedback: Some(load(&dir.join("feedback.json"))?),
            iteration_decision: Some(load(&dir.join("iteration_decision.json"))?),
            ..std::mem::take(st)
        };
        p.fix_log = load::<HistoricalFixLog>(&dir.join("fix_log.json"))?;
        let stopped = st.iteration_decision.as_ref().is_some_and(|d| !d.should_continue);
        if i + 1 == completed && stopped {
            return Ok(ResumePoint {
                config,
                progress: p,
                llm_calls,
                finished: true,
            });
        }
        p.soft_limit_events.extend(budget.after_iteration(i + 1));
    }
    let finished = completed >= config.max_iterations;
    Ok(ResumePoint {
        config,
        progress: p,
        llm_calls,
        finished,
    })
}

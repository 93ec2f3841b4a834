use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde_json::{json, Value};

use super::exec::{execute, ExecStatus, ExecutionRecord, SandboxRun};
use super::SandboxConfig;
use crate::artifacts::{ExecutionStatus, PerformanceMetrics, RuntimeError, SimulationResult, TaskSpec, TimeStep};

const TIME_COLUMNS: [&str; 5] = ["day", "time_step", "timestep", "step", "t"];
const TAIL_BYTES: usize = 4096;

/// Metrics and time series gathered from a run's result files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ingested {
    pub simulation_metrics: IndexMap<String, f64>,
    pub time_series: Vec<TimeStep>,
    /// Result files read, relative to the workspace.
    pub files: Vec<String>,
    pub warnings: Vec<String>,
}

impl Ingested {
    pub fn is_empty(&self) -> bool {
        self.simulation_metrics.is_empty() && self.time_series.is_empty()
    }
}

fn is_result_file(rel: &Path, ext: &str) -> bool {
    let Some(name) = rel.file_name().and_then(|n| n.to_str()) else {
        return false;
    };
    rel.parent().is_none_or(|p| p.as_os_str().is_empty()) && name.starts_with("results") && name.ends_with(ext)
}

fn as_step(v: &str) -> Option<i64> {
    let v = v.trim();
    v.parse::<i64>().ok().or_else(|| {
        let f = v.parse::<f64>().ok()?;
        (f.is_finite() && f.fract() == 0.0).then_some(f as i64)
    })
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn read_csv(path: &Path, steps: &mut BTreeMap<i64, IndexMap<String, f64>>) -> Result<(), String> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| e.to_string())?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let time_col = headers
        .iter()
        .position(|h| TIME_COLUMNS.contains(&h.to_ascii_lowercase().as_str()))
        .ok_or_else(|| format!("no time column (one of {})", TIME_COLUMNS.join(", ")))?;
    for (row_no, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| e.to_string())?;
        let step = row
            .get(time_col)
            .and_then(as_step)
            .ok_or_else(|| format!("row {}: time value is not an integer", row_no + 1))?;
        let entry = steps.entry(step).or_default();
        for (i, cell) in row.iter().enumerate() {
            if i == time_col {
                continue;
            }
            if let (Some(name), Some(v)) = (headers.get(i), cell.trim().parse::<f64>().ok().and_then(finite)) {
                entry.insert(name.clone(), v);
            }
        }
    }
    Ok(())
}

fn numeric_map(v: &Value) -> IndexMap<String, f64> {
    v.as_object()
        .map(|m| {
            m.iter()
                .filter_map(|(k, v)| Some((k.clone(), v.as_f64().and_then(finite)?)))
                .collect()
        })
        .unwrap_or_default()
}

fn read_json(
    path: &Path,
    metrics: &mut IndexMap<String, f64>,
    steps: &mut BTreeMap<i64, IndexMap<String, f64>>,
) -> Result<(), String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let obj = doc.as_object().ok_or("top level is not an object")?;
    if let Some(m) = obj.get("simulation_metrics") {
        metrics.extend(numeric_map(m));
    }
    if let Some(series) = obj.get("time_series_data").and_then(Value::as_array) {
        for item in series {
            let Some(o) = item.as_object() else { continue };
            let step = TIME_COLUMNS.iter().find_map(|k| {
                let v = o.get(*k)?;
                v.as_i64().or_else(|| v.as_str().and_then(as_step))
            });
            let Some(step) = step else { continue };
            let entry = steps.entry(step).or_default();
            match o.get("metrics") {
                Some(m) => entry.extend(numeric_map(m)),
                None => entry.extend(
                    numeric_map(item)
                        .into_iter()
                        .filter(|(k, _)| !TIME_COLUMNS.contains(&k.as_str())),
                ),
            }
        }
    }
    Ok(())
}

/// Reads every `results*.csv` and `results*.json` at the top of `workspace`
/// in name order. Later files override earlier values for the same key.
pub fn ingest_results(workspace: &Path, produced: &[PathBuf]) -> Ingested {
    let mut out = Ingested::default();
    let mut steps: BTreeMap<i64, IndexMap<String, f64>> = BTreeMap::new();
    let mut candidates: Vec<&PathBuf> = produced
        .iter()
        .filter(|p| is_result_file(p, ".csv") || is_result_file(p, ".json"))
        .collect();
    candidates.sort();
    for rel in candidates {
        let path = workspace.join(rel);
        let res = if is_result_file(rel, ".csv") {
            read_csv(&path, &mut steps)
        } else {
            read_json(&path, &mut out.simulation_metrics, &mut steps)
        };
        match res {
            Ok(()) => out.files.push(rel.to_string_lossy().into_owned()),
            Err(e) => out.warnings.push(format!("could not ingest {}: {e}", rel.display())),
        }
    }
    out.time_series = steps
        .into_iter()
        .filter(|(_, m)| !m.is_empty())
        .map(|(time_step, metrics)| TimeStep { time_step, metrics })
        .collect();
    out
}

fn tail(s: &str) -> String {
    if s.len() <= TAIL_BYTES {
        return s.to_string();
    }
    let mut start = s.len() - TAIL_BYTES;
    while !s.is_char_boundary(start) {
        start += 1;
    }
    s[start..].to_string()
}

/// The final exception of a traceback, if stderr holds one.
fn traceback_error(stderr: &str) -> Option<RuntimeError> {
    let lines: Vec<&str> = stderr.lines().collect();
    let tb = lines.iter().rposition(|l| l.starts_with("Traceback (most recent call last)"))?;
    let body = &lines[tb + 1..];
    let last = body.iter().rposition(|l| !l.starts_with(' ') && !l.trim().is_empty())?;
    let line = body[last];
    let (kind, message) = match line.split_once(':') {
        Some((k, m)) if !k.contains(' ') => (k.trim(), m.trim()),
        _ => (line.trim(), ""),
    };
    let location = body[..last]
        .iter()
        .rev()
        .find(|l| l.trim_start().starts_with("File \""))
        .map(|l| l.trim().to_string())
        .unwrap_or_default();
    Some(RuntimeError {
        error_type: kind.to_string(),
        message: message.to_string(),
        location,
    })
}

fn runtime_errors(rec: &ExecutionRecord, budget_secs: f64) -> Vec<RuntimeError> {
    let mut errors = Vec::new();
    match rec.status {
        ExecStatus::Success => {}
        ExecStatus::Timeout => errors.push(RuntimeError {
            error_type: "Timeout".into(),
            message: format!("program exceeded the {budget_secs} s wall clock budget and was killed"),
            location: String::new(),
        }),
        ExecStatus::LaunchFailure => errors.push(RuntimeError {
            error_type: "LaunchFailure".into(),
            message: rec.stderr.trim().to_string(),
            location: String::new(),
        }),
        ExecStatus::NonzeroExit => errors.push(traceback_error(&rec.stderr).unwrap_or_else(|| RuntimeError {
            error_type: "NonzeroExit".into(),
            message: format!(
                "exit code {}: {}",
                rec.exit_code.map_or("unknown".to_string(), |c| c.to_string()),
                rec.stderr.lines().last().unwrap_or("").trim()
            ),
            location: String::new(),
        })),
    }
    errors
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Zero out timing and memory so artifacts are byte-stable across runs.
    pub reproducible: bool,
}

/// Executes the program and assembles its [`SimulationResult`] from the
/// execution record and any result files it produced.
pub fn run_simulation(
    code_path: &Path,
    task_spec: &TaskSpec,
    data_dir: Option<&Path>,
    cfg: &SandboxConfig,
    opts: RunOptions,
) -> (SimulationResult, SandboxRun) {
    let run = execute(code_path, data_dir, &[], cfg);
    let rec = &run.record;
    let ingested = ingest_results(run.workspace.path(), &rec.produced_files);
    let execution_status = match rec.status {
        ExecStatus::Success => ExecutionStatus::Success,
        ExecStatus::NonzeroExit | ExecStatus::Timeout if !ingested.is_empty() => ExecutionStatus::PartialSuccess,
        _ => ExecutionStatus::Failure,
    };
    let budget = cfg.wall_clock.as_secs_f64();
    let runtime_errors = runtime_errors(rec, budget);

    let mut summary = match rec.status {
        ExecStatus::Success => format!("Simulation for '{}' completed successfully.", task_spec.title),
        ExecStatus::Timeout => format!("Simulation for '{}' timed out after {budget} s.", task_spec.title),
        ExecStatus::NonzeroExit => format!(
            "Simulation for '{}' exited with code {}.",
            task_spec.title,
            rec.exit_code.map_or("unknown".to_string(), |c| c.to_string())
        ),
        ExecStatus::LaunchFailure => format!("Simulation for '{}' could not be started.", task_spec.title),
    };
    if ingested.files.is_empty() {
        summary.push_str(" Warning: no result files (results*.csv or results*.json) were produced.");
    } else {
        summary.push_str(&format!(
            " Ingested {} time steps and {} summary metrics from {}.",
            ingested.time_series.len(),
            ingested.simulation_metrics.len(),
            ingested.files.join(", ")
        ));
    }
    for w in &ingested.warnings {
        summary.push_str(&format!(" Warning: {w}."));
    }

    let performance_metrics = if opts.reproducible {
        PerformanceMetrics {
            execution_time: 0.0,
            memory_usage: None,
        }
    } else {
        PerformanceMetrics {
            execution_time: rec.wall_clock,
            memory_usage: rec.peak_memory,
        }
    };
    let mut extra = serde_json::Map::new();
    extra.insert(
        "execution_record".into(),
        json!({
            "status": rec.status,
            "exit_code": rec.exit_code,
            "stdout_tail": tail(&rec.stdout),
            "stderr_tail": tail(&rec.stderr),
            "produced_files": rec.produced_files.iter().map(|p| p.to_string_lossy()).collect::<Vec<_>>(),
            "result_files": ingested.files,
        }),
    );
    let result = SimulationResult {
        execution_status,
        runtime_errors,
        performance_metrics,
        simulation_metrics: ingested.simulation_metrics,
        time_series_data: ingested.time_series,
        visualizations: Vec::new(),
        summary,
        extra,
    };
    (result, run)
}

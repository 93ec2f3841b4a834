//! The `simforge` command line: run and resume the pipeline, score
//! predictions and generate the synthetic mask-adoption dataset.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use simforge_core::agent::llm::LiveConfig;
use simforge_core::agent::AgentRuntime;
use simforge_core::workflow::{
    parse_task_file, resume_workflow, BackendMode, BackendSpec, Resumed, RunConfig, Workflow, WorkflowError,
    WorkflowOutcome,
};
use simforge_metrics::io::{read_rate_series, read_trajectories};
use simforge_metrics::{
    average_error_percentage, composite_score, curve_correlation, mobility_metrics, peak_rate_error, rmse,
    time_to_peak_error, BinningConfig, CompositeConfig, MetricError, RateSeries, Trajectory,
};
use simforge_testbed::{emit_dataset, generate_population, simulate_adoption, AdoptionParams, DEFAULT_TRAIN_END_DAY};

#[derive(Debug, Parser)]
#[command(name = "simforge", version, about = "Generate, run and refine simulator programs")]
pub struct Cli {
    /// Log level for diagnostics on standard error.
    #[arg(long, global = true, default_value = "info")]
    pub log_level: tracing::Level,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the pipeline on a task file.
    Run(RunArgs),
    /// Continue an interrupted run.
    Resume(ResumeArgs),
    /// Score predicted against actual series.
    Evaluate(EvaluateArgs),
    /// Generate the synthetic mask-adoption dataset.
    GenData(GenDataArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    Live,
    Record,
    Replay,
}

impl From<Backend> for BackendMode {
    fn from(b: Backend) -> Self {
        match b {
            Backend::Live => BackendMode::Live,
            Backend::Record => BackendMode::Record,
            Backend::Replay => BackendMode::Replay,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Task description file.
    #[arg(long)]
    pub task: PathBuf,
    /// Data directory; defaults to the task's data_folder, relative to the task file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Run directory; must not hold an earlier run.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub max_iterations: usize,
    #[arg(long, value_enum, default_value_t = Backend::Live)]
    pub backend: Backend,
    /// Transcript to replay from or record to.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// JSON file with the live endpoint settings.
    #[arg(long)]
    pub live_config: Option<PathBuf>,
    /// Match replayed calls on agent name only.
    #[arg(long)]
    pub lenient_replay: bool,
    #[arg(long, default_value = "python3")]
    pub interpreter: String,
    #[arg(long, default_value_t = simforge_core::sandbox::DEFAULT_WALL_CLOCK_SECS)]
    pub timeout_seconds: u64,
    #[arg(long, default_value_t = simforge_core::sandbox::DEFAULT_MEMORY_MB)]
    pub memory_mb: u64,
    /// Program file suffix.
    #[arg(long, default_value = "py")]
    pub code_suffix: String,
    /// `day,rate` reference scored against the simulated `rate` series.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    /// Also ask the model to review each data sample.
    #[arg(long)]
    pub llm_integrity: bool,
    /// Zero timing fields in artifacts; always on for replay.
    #[arg(long)]
    pub reproducible: bool,
}

#[derive(Debug, Args)]
pub struct ResumeArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Replay transcript to use instead of the recorded one.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub predicted: PathBuf,
    #[arg(long)]
    pub actual: PathBuf,
    /// Comma-separated metric names; defaults to the rate metric set.
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<String>,
    /// JSON file with optional `composite` weights and mobility `binning`.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 1000)]
    pub agents: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 40)]
    pub horizon: u32,
    #[arg(long, default_value_t = DEFAULT_TRAIN_END_DAY)]
    pub train_end_day: u32,
    /// JSON file of adoption parameters; missing keys keep their defaults.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// A command failure and the exit status it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration; nothing was run.
    Usage(String),
    /// The command ran and did not meet its postcondition.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Failed(m) => m,
        }
    }
}

/// Machine output and whether the command met its postcondition.
#[derive(Debug)]
pub struct Report {
    pub output: Value,
    pub success: bool,
}

impl Report {
    fn ok(output: Value) -> Self {
        Report { output, success: true }
    }
}

pub fn execute(command: Command) -> Result<Report, CliError> {
    match command {
        Command::Run(a) => cmd_run(a),
        Command::Resume(a) => cmd_resume(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::GenData(a) => cmd_gen_data(a),
    }
}

fn absolute(p: &Path) -> Result<PathBuf, CliError> {
    std::path::absolute(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
}

fn existing(p: &Path, what: &str) -> Result<PathBuf, CliError> {
    fs::canonicalize(p).map_err(|e| CliError::Usage(format!("{what} {}: {e}", p.display())))
}

fn read_json_file<T: serde::de::DeserializeOwned>(p: &Path, what: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{what} {}: {e}", p.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{what} {}: {e}", p.display())))
}

/// Builds the run configuration, resolving every path to an absolute one.
pub fn run_config(a: &RunArgs) -> Result<RunConfig, CliError> {
    let task_path = existing(&a.task, "task file")?;
    let text = fs::read_to_string(&task_path).map_err(|e| CliError::Usage(format!("task file: {e}")))?;
    let task = parse_task_file(&text);
    let data_dir = match (&a.data, &task.data_folder) {
        (Some(d), _) => Some(existing(d, "data directory")?),
        (None, Some(folder)) => {
            let base = task_path.parent().unwrap_or(Path::new("."));
            Some(existing(&base.join(folder), "task data_folder (pass --data to override)")?)
        }
        (None, None) => None,
    };
    let transcript = match (a.backend, &a.transcript) {
        (Backend::Replay, Some(t)) => Some(existing(t, "transcript")?),
        (_, Some(t)) => Some(absolute(t)?),
        (Backend::Live, None) => None,
        (mode, None) => {
            return Err(CliError::Usage(format!(
                "--backend {} needs --transcript",
                mode.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
            )))
        }
    };
    let live: LiveConfig = match &a.live_config {
        Some(p) => read_json_file(p, "live config")?,
        None => LiveConfig::default(),
    };
    let cfg = RunConfig {
        task_description: text,
        data_dir,
        max_iterations: a.max_iterations,
        interpreter: a.interpreter.clone(),
        timeout_seconds: a.timeout_seconds,
        memory_mb: a.memory_mb,
        code_suffix: a.code_suffix.clone(),
        ground_truth: a.ground_truth.as_deref().map(|g| existing(g, "ground truth")).transpose()?,
        reproducible: a.reproducible || a.backend == Backend::Replay,
        llm_integrity: a.llm_integrity,
        backend: BackendSpec {
            mode: a.backend.into(),
            transcript,
            lenient_replay: a.lenient_replay,
            live,
        },
    };
    cfg.validate().map_err(CliError::Usage)?;
    Ok(cfg)
}

fn outcome_json(out: &Path, o: &WorkflowOutcome) -> Value {
    json!({
        "out": out,
        "final_code_path": o.final_code_path.as_ref().map(|p| out.join(p)),
        "iterations_run": o.iterations_run,
        "stop_reason": o.stop_reason,
        "soft_iteration_limit": o.budget.soft_iteration_limit,
        "soft_limit_events": o.soft_limit_events,
    })
}

fn outcome_report(out: &Path, o: &WorkflowOutcome) -> Report {
    Report {
        output: outcome_json(out, o),
        success: !o.stop_reason.is_failure(),
    }
}

fn workflow_error(e: WorkflowError) -> CliError {
    match e {
        WorkflowError::Config(m) => CliError::Usage(m),
        other => CliError::Failed(other.to_string()),
    }
}

pub fn cmd_run(a: RunArgs) -> Result<Report, CliError> {
    let cfg = run_config(&a)?;
    let out = absolute(&a.out)?;
    let backend = cfg.backend.build(0).map_err(|e| CliError::Usage(e.to_string()))?;
    let rt = AgentRuntime::new(backend);
    let outcome = Workflow::new(&rt, &cfg, &out).and_then(|w| w.run()).map_err(workflow_error)?;
    Ok(outcome_report(&out, &outcome))
}

pub fn cmd_resume(a: ResumeArgs) -> Result<Report, CliError> {
    let out = absolute(&a.out)?;
    let transcript = a.transcript.as_deref().map(|t| existing(t, "transcript")).transpose()?;
    match resume_workflow(&out, transcript.as_deref()) {
        Ok(Resumed::AlreadyFinished(o)) => {
            eprintln!("run in {} already finished; nothing to do", out.display());
            let mut r = outcome_report(&out, &o);
            r.output["already_finished"] = json!(true);
            Ok(r)
        }
        Ok(Resumed::Continued(o)) => Ok(outcome_report(&out, &o)),
        Err(e @ WorkflowError::Resume { .. }) => Err(CliError::Failed(e.to_string())),
        Err(e) => Err(workflow_error(e)),
    }
}

/// Rate metrics reported when none are named.
pub const RATE_METRICS: [&str; 4] = ["rmse", "peak_rate_error", "time_to_peak_error", "curve_correlation"];
pub const MOBILITY_METRICS: [&str; 4] = ["sd", "si", "dard", "stvd"];
const ALL_RATE_METRICS: [&str; 5] = [
    "rmse",
    "peak_rate_error",
    "time_to_peak_error",
    "curve_correlation",
    "average_error_percentage",
];

#[derive(Debug, Default, serde::Deserialize)]
#[serde(default)]
struct EvalConfig {
    composite: Option<CompositeConfig>,
    binning: BinningConfig,
}

fn open(p: &Path) -> Result<File, CliError> {
    File::open(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
}

fn rates(p: &Path) -> Result<RateSeries, CliError> {
    read_rate_series(open(p)?).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
}

fn trajectories(p: &Path) -> Result<Vec<Trajectory>, CliError> {
    read_trajectories(open(p)?).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
}

fn metric_failure(name: &str, e: MetricError) -> CliError {
    CliError::Failed(format!("{name}: {e}"))
}

pub fn cmd_evaluate(a: EvaluateArgs) -> Result<Report, CliError> {
    let names: Vec<String> = if a.metrics.is_empty() {
        RATE_METRICS.iter().map(|s| s.to_string()).collect()
    } else {
        a.metrics.iter().map(|m| m.trim().to_ascii_lowercase()).filter(|m| !m.is_empty()).collect()
    };
    let unknown: Vec<&String> = names
        .iter()
        .filter(|n| !ALL_RATE_METRICS.contains(&n.as_str()) && !MOBILITY_METRICS.contains(&n.as_str()))
        .collect();
    if !unknown.is_empty() {
        return Err(CliError::Usage(format!(
            "unknown metrics {unknown:?}; known: {}, {}",
            ALL_RATE_METRICS.join(", "),
            MOBILITY_METRICS.join(", ")
        )));
    }
    let mobility = names.iter().filter(|n| MOBILITY_METRICS.contains(&n.as_str())).count();
    if mobility != 0 && mobility != names.len() {
        return Err(CliError::Usage("rate and mobility metrics cannot be mixed".into()));
    }
    let cfg: EvalConfig = match &a.config {
        Some(p) => read_json_file(p, "evaluation config")?,
        None => EvalConfig::default(),
    };

    let mut values = Map::new();
    let mut correlation = None;
    if mobility > 0 {
        let m = mobility_metrics(&trajectories(&a.predicted)?, &trajectories(&a.actual)?, &cfg.binning)
            .map_err(|e| metric_failure("mobility", e))?;
        for n in &names {
            let v = match n.as_str() {
                "sd" => m.sd,
                "si" => m.si,
                "dard" => m.dard,
                _ => m.stvd,
            };
            values.insert(n.clone(), json!(v));
        }
    } else {
        let (p, q) = (rates(&a.predicted)?, rates(&a.actual)?);
        for n in &names {
            let v = match n.as_str() {
                "rmse" => json!(rmse(&p, &q).map_err(|e| metric_failure(n, e))?),
                "peak_rate_error" => json!(peak_rate_error(&p, &q).map_err(|e| metric_failure(n, e))?),
                "time_to_peak_error" => json!(time_to_peak_error(&p, &q).map_err(|e| metric_failure(n, e))?),
                "curve_correlation" => {
                    let r = curve_correlation(&p, &q).map_err(|e| metric_failure(n, e))?;
                    correlation = Some(r);
                    json!(r)
                }
                _ => json!(average_error_percentage(&p, &q).map_err(|e| metric_failure(n, e))?),
            };
            values.insert(n.clone(), v);
        }
        if !names.iter().any(|n| n == "rmse") {
            // Day alignment is checked even when no paired metric was asked for.
            rmse(&p, &q).map_err(|e| metric_failure("alignment", e))?;
        }
    }
    if let Some(composite) = &cfg.composite {
        let errors: BTreeMap<String, f64> = values
            .iter()
            .filter(|(k, _)| k.as_str() != "curve_correlation")
            .filter_map(|(k, v)| v.as_f64().map(|f| (k.clone(), f)))
            .collect();
        let score = composite_score(&errors, correlation, composite).map_err(|e| CliError::Usage(e.to_string()))?;
        values.insert("composite_score".into(), json!(score));
    }
    Ok(Report::ok(Value::Object(values)))
}

pub fn cmd_gen_data(a: GenDataArgs) -> Result<Report, CliError> {
    let params: AdoptionParams = match &a.params {
        Some(p) => read_json_file(p, "adoption parameters")?,
        None => AdoptionParams::default(),
    };
    let pop = generate_population(a.agents, a.seed);
    let records = simulate_adoption(&pop, &params, a.horizon, a.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let files = emit_dataset(&pop, &records, &a.out, a.train_end_day).map_err(|e| CliError::Failed(e.to_string()))?;
    let mut manifest = Vec::new();
    for f in files.all() {
        let bytes = fs::metadata(f).map_err(|e| CliError::Failed(format!("{}: {e}", f.display())))?.len();
        manifest.push(json!({"path": f, "bytes": bytes}));
    }
    Ok(Report::ok(json!({
        "agents": a.agents,
        "seed": a.seed,
        "horizon": a.horizon,
        "train_end_day": a.train_end_day,
        "files": manifest,
    })))
}

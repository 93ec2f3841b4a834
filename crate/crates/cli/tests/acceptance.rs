//! Acceptance criteria AC1 to AC10. Each test prints one `ACn PASS|FAIL`
//! line to the process stdout, bypassing the harness capture.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use simforge_core::agent::llm::ScriptedBackend;
use simforge_core::agent::{AgentRuntime, LlmRequest};
use simforge_core::artifacts::{Artifact, FixStatus, HistoricalFixLog, ModelPlan, TaskSpec, Termination};
use simforge_core::forge::{generate_code, GenerationInputs};
use simforge_core::sandbox::{execute, parse_check, ExecStatus, SandboxConfig};
use simforge_mask_fixture::{fixtures_dir, record_run, transcript_path, MaskScript, TRANSCRIPT_ITERATIONS};
use simforge_metrics::io::read_rate_series;
use simforge_metrics::{jsd, peak_rate_error, rmse, time_to_peak_error, Distribution, RateSeries};
use simforge_testbed::{emit_dataset, generate_population, population_rate, simulate_adoption, AdoptionParams};

const RMSE_TOL: f64 = 1e-12;
const JSD_TOL: f64 = 1e-12;
const ORACLE_BUDGET: Duration = Duration::from_secs(5);
const REPLAY_BUDGET: Duration = Duration::from_secs(120);
const TESTBED_BUDGET: Duration = Duration::from_secs(30);
const TIMEOUT_PROBE_SECS: u64 = 2;
const TIMEOUT_SLACK: f64 = 1.2;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn report(id: &str, title: &str, result: Check) {
    let line = match &result {
        Ok(detail) => format!("{id} PASS {title}: {detail}"),
        Err(why) => format!("{id} FAIL {title}: {why}"),
    };
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").unwrap();
    out.flush().unwrap();
    if let Err(why) = result {
        panic!("{id} failed: {why}");
    }
}

// Pipeline fixtures driven through the `simforge` binary.

struct Env {
    dir: tempfile::TempDir,
}

impl Env {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::copy(fixtures_dir().join("task.md"), dir.path().join("task.md")).unwrap();
        let env = Env { dir };
        let o = simforge(&[
            "gen-data", "--agents", "100", "--seed", "7", "--horizon", "40", "--out", &env.s("data"),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        env
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    /// Records a transcript for `script` against the scripted model.
    fn record(&self, name: &str, script: MaskScript, max: usize) -> Result<PathBuf, String> {
        let t = self.path(&format!("{name}.jsonl"));
        let outcome = record_run(script, &self.path("data"), &self.path(&format!("{name}-rec")), &t, max)
            .map_err(|e| format!("recording {name}: {e}"))?;
        ensure(!outcome.stop_reason.is_failure(), || format!("recording {name}: {:?}", outcome.stop_reason))?;
        Ok(t)
    }

    fn run(&self, transcript: &Path, max: usize, out: &str, log_level: &str) -> Output {
        let max = max.to_string();
        Command::new(env!("CARGO_BIN_EXE_simforge"))
            .args(["--log-level", log_level, "run", "--task", &self.s("task.md"), "--data", &self.s("data")])
            .args(["--ground-truth", &self.s("data/ground_truth.csv"), "--timeout-seconds", "60"])
            .args(["--backend", "replay", "--transcript", transcript.to_str().unwrap()])
            .args(["--max-iterations", &max, "--out", &self.s(out)])
            .output()
            .unwrap()
    }
}

fn simforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simforge")).args(["--log-level", "warn"]).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout_json(o: &Output) -> Result<Value, String> {
    serde_json::from_slice(&o.stdout).map_err(|e| format!("{e}; stderr: {}", stderr(o)))
}

fn succeeded(o: &Output) -> Result<Value, String> {
    ensure(o.status.success(), || format!("exit {:?}: {}", o.status.code(), stderr(o)))?;
    stdout_json(o)
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn diff_trees(a: &Path, b: &Path) -> Result<(), String> {
    let (ta, tb) = (tree(a), tree(b));
    let ka: Vec<_> = ta.keys().collect();
    let kb: Vec<_> = tb.keys().collect();
    ensure(ka == kb, || format!("file sets differ: {ka:?} vs {kb:?}"))?;
    match ta.iter().find(|(k, v)| tb[*k] != **v) {
        Some((k, _)) => Err(format!("{} differs", k.display())),
        None => Ok(()),
    }
}

fn rmse_of(eval: &Value) -> Option<f64> {
    eval["metrics"].as_array()?.iter().find(|m| m["name"] == "rmse")?["simulation_value"].as_f64()
}

const SLOTS: [&str; 9] = [
    "task_spec",
    "data_analysis",
    "model_plan",
    "generated_code",
    "verification_results",
    "simulation_results",
    "evaluation_results",
    "feedback",
    "iteration_decision",
];

// AC1

fn random_series(rng: &mut ChaCha8Rng) -> (Vec<f64>, RateSeries) {
    let rates: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..=1.0)).collect();
    let series = RateSeries::from_pairs(rates.iter().enumerate().map(|(d, r)| (30 + d as i64, *r))).unwrap();
    (rates, series)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

fn ac1() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let (p, ps) = random_series(&mut rng);
        let (a, as_) = random_series(&mut rng);
        let brute = (p.iter().zip(&a).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / p.len() as f64).sqrt();
        let got = rmse(&ps, &as_).map_err(|e| e.to_string())?;
        worst = worst.max((got - brute).abs());
        ensure((got - brute).abs() <= RMSE_TOL, || format!("case {case}: rmse {got} vs {brute}"))?;
        let (ip, ia) = (argmax(&p), argmax(&a));
        let peak = peak_rate_error(&ps, &as_).map_err(|e| e.to_string())?;
        ensure(peak == (p[ip] - a[ia]).abs(), || format!("case {case}: peak error {peak}"))?;
        let ttp = time_to_peak_error(&ps, &as_).map_err(|e| e.to_string())?;
        ensure(ttp == (ip as i64 - ia as i64).abs(), || format!("case {case}: time-to-peak {ttp}"))?;
    }
    let took = start.elapsed();
    ensure(took < ORACLE_BUDGET, || format!("took {took:?}"))?;
    Ok(format!("1000 pairs, max rmse deviation {worst:e} <= {RMSE_TOL:e}, {took:?}"))
}

#[test]
fn ac1_metric_oracles() {
    report("AC1", "metric oracles", ac1());
}

// AC2

fn labels() -> Vec<String> {
    (0..16).map(|i| format!("bin{i}")).collect()
}

fn random_dist(rng: &mut ChaCha8Rng) -> Distribution {
    let counts: Vec<f64> =
        (0..16).map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..1.0) }).collect();
    let counts = if counts.iter().sum::<f64>() > 0.0 { counts } else { vec![1.0; 16] };
    Distribution::from_counts(labels(), &counts).unwrap()
}

fn brute_jsd(p: &[f64], q: &[f64]) -> f64 {
    let kl = |a: &[f64], m: &[f64]| -> f64 {
        a.iter().zip(m).filter(|(x, _)| **x > 0.0).map(|(x, y)| x * (x / y).ln()).sum::<f64>() / 2f64.ln()
    };
    let m: Vec<f64> = p.iter().zip(q).map(|(x, y)| (x + y) / 2.0).collect();
    0.5 * kl(p, &m) + 0.5 * kl(q, &m)
}

fn ac2() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let (p, q) = (random_dist(&mut rng), random_dist(&mut rng));
        let pq = jsd(&p, &q).map_err(|e| e.to_string())?;
        let qp = jsd(&q, &p).map_err(|e| e.to_string())?;
        ensure((pq - qp).abs() <= JSD_TOL, || format!("case {case}: asymmetry {}", (pq - qp).abs()))?;
        ensure((0.0..=1.0).contains(&pq), || format!("case {case}: {pq} out of [0, 1]"))?;
        let same = jsd(&p, &p).map_err(|e| e.to_string())?;
        ensure(same == 0.0, || format!("case {case}: jsd(p, p) = {same}"))?;
        let brute = brute_jsd(p.probabilities(), q.probabilities());
        worst = worst.max((pq - brute).abs());
        ensure((pq - brute).abs() <= JSD_TOL, || format!("case {case}: {pq} vs brute force {brute}"))?;

        let split = rng.gen_range(1..16);
        let left: Vec<f64> = (0..16).map(|i| if i < split { rng.gen_range(0.1..1.0) } else { 0.0 }).collect();
        let right: Vec<f64> = (0..16).map(|i| if i >= split { rng.gen_range(0.1..1.0) } else { 0.0 }).collect();
        let d = jsd(
            &Distribution::from_counts(labels(), &left).unwrap(),
            &Distribution::from_counts(labels(), &right).unwrap(),
        )
        .map_err(|e| e.to_string())?;
        ensure((d - 1.0).abs() <= JSD_TOL, || format!("case {case}: disjoint supports give {d}"))?;
    }
    let took = start.elapsed();
    ensure(took < ORACLE_BUDGET, || format!("took {took:?}"))?;
    Ok(format!("1000 pairs, max brute-force deviation {worst:e} <= {JSD_TOL:e}, {took:?}"))
}

#[test]
fn ac2_jsd_suite() {
    report("AC2", "jsd suite", ac2());
}

// AC3

fn ac3() -> Check {
    let env = Env::new();
    let t = env.record("always", MaskScript { stop_at: None, ..MaskScript::default() }, 10)?;
    let v = succeeded(&env.run(&t, 10, "run", "warn"))?;
    ensure(v["iterations_run"] == 10, || format!("iterations_run {}", v["iterations_run"]))?;
    ensure(v["stop_reason"]["kind"] == "max_iterations", || format!("stop reason {}", v["stop_reason"]))?;
    let after: Vec<u64> =
        v["soft_limit_events"].as_array().unwrap().iter().map(|e| e["after_iteration"].as_u64().unwrap()).collect();
    ensure(after == [3, 6, 9], || format!("extensions after {after:?}"))?;
    ensure(env.path("run/iter_9").is_dir() && !env.path("run/iter_10").exists(), || "iteration dirs".into())?;
    Ok(format!("10 iterations, extensions after {after:?}"))
}

#[test]
fn ac3_iteration_schedule() {
    report("AC3", "iteration schedule", ac3());
}

// AC4

fn ac4() -> Check {
    let env = Env::new();
    let script = MaskScript { stop_at: Some(1), failing_verification: vec![0], ..MaskScript::default() };
    let t = env.record("failing", script, 3)?;
    let o = env.run(&t, 3, "run", "info");
    succeeded(&o)?;
    let run = env.path("run");
    for slot in ["simulation_results", "evaluation_results"] {
        ensure(!run.join(format!("iter_0/{slot}.json")).exists(), || format!("iter_0/{slot}.json persisted"))?;
    }
    let log = stderr(&o);
    let skip = log
        .lines()
        .find(|l| l.contains("skipping initial steps due to previous failure"))
        .ok_or("no skip message logged")?;
    ensure(skip.contains("iteration=1"), || format!("skip logged for another iteration: {skip}"))?;
    ensure(read_json(&run.join("iter_1/iteration_meta.json"))?["skipped_initial"] == true, || {
        "iteration 1 not marked skipped".into()
    })?;
    for slot in ["task_spec", "data_analysis", "model_plan"] {
        ensure(!run.join(format!("iter_1/{slot}.json")).exists(), || format!("iter_1/{slot}.json regenerated"))?;
    }
    Ok("iteration 0 has no simulation or evaluation; iteration 1 logged the skip".into())
}

#[test]
fn ac4_skip_initial() {
    report("AC4", "skip-initial behavior", ac4());
}

// AC5

fn ac5() -> Check {
    let start = Instant::now();
    let env = Env::new();
    let v = succeeded(&env.run(&transcript_path(), TRANSCRIPT_ITERATIONS, "run", "warn"))?;
    let n = v["iterations_run"].as_u64().unwrap_or(0) as usize;
    ensure(n >= 2, || format!("only {n} iterations"))?;
    let run = env.path("run");
    for i in 0..n {
        for slot in SLOTS {
            ensure(run.join(format!("iter_{i}/{slot}.json")).is_file(), || format!("iter_{i}/{slot}.json missing"))?;
        }
    }
    let last = n - 1;
    let sim = read_json(&run.join(format!("iter_{last}/simulation_results.json")))?;
    ensure(sim["execution_status"] == "success", || format!("final status {}", sim["execution_status"]))?;
    let final_code = PathBuf::from(v["final_code_path"].as_str().ok_or("no final program")?);
    let rerun = execute(&final_code, Some(&env.path("data")), &[], &SandboxConfig::default());
    ensure(rerun.record.status == ExecStatus::Success, || format!("final program rerun: {}", rerun.record.stderr))?;
    let eval = read_json(&run.join(format!("iter_{last}/evaluation_results.json")))?;
    let final_rmse = rmse_of(&eval).ok_or("no rmse metric")?;
    ensure(final_rmse == 0.0, || format!("final rmse {final_rmse}"))?;
    let took = start.elapsed();
    ensure(took < REPLAY_BUDGET, || format!("took {took:?}"))?;
    Ok(format!("{n} iterations, nine artifacts each, final status success, rmse = 0, {took:?}"))
}

#[test]
fn ac5_end_to_end_replay() {
    report("AC5", "end-to-end replay", ac5());
}

// AC6

const CLEAN: &str = "def main():\n    \"\"\"Run.\"\"\"\n    print(1)\n\n\nmain()\n";
const NO_ISSUES: &str = "{\"issues\": []}";
const ONE_ISSUE: &str =
    "{\"issues\": [{\"description\": \"placeholder step\", \"location\": \"main\", \"severity\": \"high\"}]}";

fn self_check(replies: &[(&'static str, &'static str)]) -> Result<simforge_core::artifacts::GeneratedCode, String> {
    let replies: HashMap<&str, &str> = replies.iter().copied().collect();
    let calls = Arc::new(Mutex::new(0usize));
    let rt = AgentRuntime::new(Arc::new(ScriptedBackend::new(move |r: &LlmRequest| {
        *calls.lock().unwrap() += 1;
        Ok(replies.get(r.agent_name.as_str()).unwrap_or_else(|| panic!("no reply for {}", r.agent_name)).to_string())
    })));
    let spec = TaskSpec::from_value(json!({"title": "t", "description": "d", "simulation_type": "s", "entities": []}))
        .map_err(|e| format!("{e:?}"))?;
    let plan = ModelPlan::from_value(json!({
        "model_type": "agent_based", "description": "d",
        "entities": [{"name": "Person"}], "behaviors": [{"name": "adopt"}]
    }))
    .map_err(|e| format!("{e:?}"))?;
    let inputs = GenerationInputs {
        task_spec: &spec,
        model_plan: &plan,
        data_analysis: None,
        feedback: None,
        previous_code: None,
        fix_log: None,
    };
    generate_code(&rt, &inputs, &SandboxConfig::default()).map_err(|e| e.to_string())
}

fn ac6() -> Check {
    let clean = self_check(&[("code_generation", CLEAN), ("code_generation.quality_check", NO_ISSUES)])?;
    let trace = clean.self_check.ok_or("no trace")?;
    ensure(trace.attempts.len() == 1 && trace.terminated_by == Termination::Clean, || {
        format!("clean: {} attempts, {:?}", trace.attempts.len(), trace.terminated_by)
    })?;

    let stuck = self_check(&[
        ("code_generation", CLEAN),
        ("code_generation.quality_check", ONE_ISSUE),
        ("code_generation.improve", CLEAN),
    ])?;
    let trace = stuck.self_check.ok_or("no trace")?;
    ensure(trace.attempts.len() == 3 && trace.terminated_by == Termination::AttemptsExhausted, || {
        format!("persistent issues: {} attempts, {:?}", trace.attempts.len(), trace.terminated_by)
    })?;

    let fenced = "Here is the program:\n```python\ndef main():\n    \"\"\"Run the simulation.\n    print(1)\n```\nDone.";
    let repaired = self_check(&[("code_generation", fenced), ("code_generation.quality_check", NO_ISSUES)])?;
    ensure(!repaired.code.contains("```"), || "fences survived".into())?;
    let parsed = parse_check(&repaired.code, &SandboxConfig::default()).map_err(|e| e.to_string())?;
    ensure(parsed.ok, || format!("repaired program does not parse: {:?}", parsed.diagnostic))?;
    Ok("clean at attempt 1, exhausted at attempt 3, fenced docstring repaired".into())
}

#[test]
fn ac6_self_check_loop() {
    report("AC6", "self-check loop", ac6());
}

// AC7

fn strings(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::String(s) => out.push(s.clone()),
        Value::Array(a) => a.iter().for_each(|x| strings(x, out)),
        Value::Object(o) => o.values().for_each(|x| strings(x, out)),
        _ => {}
    }
}

fn ac7() -> Check {
    let env = Env::new();
    let t = env.record("four", MaskScript { stop_at: Some(3), ..MaskScript::default() }, 4)?;
    let v = succeeded(&env.run(&t, 4, "run", "warn"))?;
    ensure(v["iterations_run"] == 4, || format!("iterations_run {}", v["iterations_run"]))?;
    let run = env.path("run");
    let mut feedback_text = Vec::new();
    let mut previous = HistoricalFixLog::default();
    for i in 0..4 {
        strings(&read_json(&run.join(format!("iter_{i}/feedback.json")))?, &mut feedback_text);
        let log: HistoricalFixLog = serde_json::from_value(read_json(&run.join(format!("iter_{i}/fix_log.json")))?)
            .map_err(|e| e.to_string())?;
        for (key, e) in log.entries() {
            ensure(feedback_text.iter().any(|s| s.contains(&e.issue)), || {
                format!("iteration {i}: issue {:?} never appeared in feedback", e.issue)
            })?;
            ensure(e.status != FixStatus::Fixed || !e.fixed_log.is_empty(), || {
                format!("iteration {i}: fixed entry {:?} without fixed_log", e.issue)
            })?;
            let before = previous.0.get(key).and_then(|v| v.iter().find(|p| p.issue == e.issue));
            ensure(!matches!(before, Some(b) if b.status == FixStatus::Fixed && e.status == FixStatus::Open), || {
                format!("iteration {i}: {:?} went from fixed to open", e.issue)
            })?;
        }
        previous = log;
    }
    Ok(format!("4 iterations, {} fixed and {} open entries, no reopen", previous.fixed_count(), previous.open_count()))
}

#[test]
fn ac7_fix_log_state_machine() {
    report("AC7", "fix-log state machine", ac7());
}

// AC8

fn probe(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("probe.py");
    fs::write(&p, body).unwrap();
    p
}

fn ac8() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let budget = SandboxConfig { wall_clock: Duration::from_secs(TIMEOUT_PROBE_SECS), ..SandboxConfig::default() };
    let spin = execute(&probe(dir.path(), "while True:\n    pass\n"), None, &[], &budget);
    let (b, w) = (TIMEOUT_PROBE_SECS as f64, spin.record.wall_clock);
    ensure(spin.record.status == ExecStatus::Timeout, || format!("spin loop ended as {:?}", spin.record.status))?;
    ensure(w >= b && w <= TIMEOUT_SLACK * b, || format!("timeout after {w} s, outside [{b}, {}]", TIMEOUT_SLACK * b))?;

    let cfg = SandboxConfig::default();
    let outside = tempfile::tempdir().unwrap();
    let target = outside.path().join("escaped.txt");
    let escape = format!(
        "ok = 0\nfor p in [{:?}, '../escaped.txt', '/tmp/simforge-acceptance-escape']:\n    try:\n        open(p, 'w').write('x')\n        ok += 1\n    except OSError:\n        pass\nprint(ok)\n",
        target.to_string_lossy()
    );
    let run = execute(&probe(dir.path(), &escape), None, &[], &cfg);
    ensure(run.record.stdout.trim() == "0" && !target.exists(), || {
        format!("filesystem escape: {} {}", run.record.stdout, run.record.stderr)
    })?;

    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let net = format!(
        "import socket\ntry:\n    socket.create_connection(('127.0.0.1', {port}), timeout=2)\n    print('connected')\nexcept OSError:\n    print('denied')\n"
    );
    let run = execute(&probe(dir.path(), &net), None, &[], &cfg);
    ensure(run.record.stdout.trim() == "denied", || format!("network probe: {} {}", run.record.stdout, run.record.stderr))?;

    let data = outside.path().join("data");
    fs::create_dir(&data).unwrap();
    for f in ["agent_attributes.csv", "social_network.json", "train_data.csv"] {
        fs::write(data.join(f), "x").unwrap();
    }
    let contract = "import os\nd = os.path.join(os.environ['PROJECT_ROOT'], os.environ['DATA_PATH'])\nprint(','.join(sorted(os.listdir(d))))\n";
    let run = execute(&probe(dir.path(), contract), Some(&data), &[], &cfg);
    ensure(run.record.stdout.trim() == "agent_attributes.csv,social_network.json,train_data.csv", || {
        format!("env contract: {} {}", run.record.stdout, run.record.stderr)
    })?;
    Ok(format!("timeout after {w:.3} s for B = {b} s, escape and network denied, data dir listed"))
}

#[test]
fn ac8_sandbox_isolation() {
    report("AC8", "sandbox isolation", ac8());
}

// AC9

fn emit(n: usize, seed: u64, dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let pop = generate_population(n, seed);
    let records = simulate_adoption(&pop, &AdoptionParams::default(), 40, seed).map_err(|e| e.to_string())?;
    let files = emit_dataset(&pop, &records, dir, 29).map_err(|e| e.to_string())?;
    Ok(files
        .all()
        .iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(p).unwrap()))
        .collect())
}

fn ac9() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let root = tempfile::tempdir().unwrap();
    for _ in 0..20 {
        let seed: u64 = rng.gen();
        let pop = generate_population(200, seed);
        pop.network.check_invariants().map_err(|e| format!("seed {seed}: {e}"))?;
        for (a, ties) in pop.agents.iter().zip(&pop.network.ties) {
            ensure(
                a.total_connections == a.family_connections + a.work_school_connections + a.community_connections,
                || format!("seed {seed}: agent {} total_connections", a.agent_id),
            )?;
            ensure(
                a.family_connections as usize == ties.family.len()
                    && a.work_school_connections as usize == ties.work_school.len()
                    && a.community_connections as usize == ties.community.len(),
                || format!("seed {seed}: agent {} counts differ from its ties", a.agent_id),
            )?;
        }
        let first = emit(200, seed, &root.path().join(format!("{seed}-a")))?;
        let second = emit(200, seed, &root.path().join(format!("{seed}-b")))?;
        ensure(first == second, || format!("seed {seed}: reruns differ"))?;

        let records = simulate_adoption(&pop, &AdoptionParams::default(), 40, seed).map_err(|e| e.to_string())?;
        let rate = population_rate(&records, 30, 39).map_err(|e| e.to_string())?;
        let gt = fs::File::open(root.path().join(format!("{seed}-a/ground_truth.csv"))).unwrap();
        let truth = read_rate_series(gt).map_err(|e| e.to_string())?;
        let err = rmse(&rate, &truth).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(err == 0.0, || format!("seed {seed}: rmse {err}"))?;
    }
    let took = start.elapsed();
    ensure(took < TESTBED_BUDGET, || format!("took {took:?}"))?;
    Ok(format!("20 seeds at n = 200, invariants hold, reruns identical, rmse = 0, {took:?}"))
}

#[test]
fn ac9_testbed_self_consistency() {
    report("AC9", "testbed self-consistency", ac9());
}

// AC10

fn ac10() -> Check {
    let env = Env::new();
    let transcript = env.path("transcript.jsonl");
    let full = fs::read_to_string(transcript_path()).unwrap();
    fs::write(&transcript, &full).unwrap();
    let n = TRANSCRIPT_ITERATIONS;

    succeeded(&env.run(&transcript, n, "a", "warn"))?;
    succeeded(&env.run(&transcript, n, "b", "warn"))?;
    diff_trees(&env.path("a"), &env.path("b")).map_err(|e| format!("two straight runs: {e}"))?;

    // Cutting the transcript mid-run interrupts the run at a stage boundary.
    let cut: String = full.lines().take(20).map(|l| format!("{l}\n")).collect();
    fs::write(&transcript, cut).unwrap();
    let o = env.run(&transcript, n, "resumed", "warn");
    ensure(o.status.code() == Some(1), || format!("interrupted run exited {:?}", o.status.code()))?;
    let partial = stdout_json(&o)?;
    ensure(partial["stop_reason"]["kind"] == "stage_failure", || format!("stop reason {}", partial["stop_reason"]))?;

    fs::write(&transcript, &full).unwrap();
    let r = simforge(&["resume", "--out", &env.s("resumed")]);
    let resumed = succeeded(&r)?;
    ensure(resumed["iterations_run"] == n, || format!("resumed run has {} iterations", resumed["iterations_run"]))?;
    diff_trees(&env.path("a"), &env.path("resumed")).map_err(|e| format!("resumed vs straight: {e}"))?;
    Ok(format!(
        "two runs identical; run interrupted at iteration {} and resumed matches the straight run",
        partial["stop_reason"]["iteration"]
    ))
}

#[test]
fn ac10_replay_determinism() {
    report("AC10", "replay determinism", ac10());
}

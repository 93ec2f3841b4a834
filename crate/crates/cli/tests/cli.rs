use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use simforge_mask_fixture::{fixtures_dir, transcript_path, write_dataset};

fn simforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simforge"))
        .args(["--log-level", "warn"])
        .args(args)
        .output()
        .unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}\n{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr)))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_rates(path: &Path, rows: &[(i64, f64)]) {
    let body: String = rows.iter().map(|(d, r)| format!("{d},{r}\n")).collect();
    fs::write(path, format!("day,rate\n{body}")).unwrap();
}

/// Temp dir holding the mask task file next to its `data/` folder.
fn mask_env() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(fixtures_dir().join("task.md"), dir.path().join("task.md")).unwrap();
    write_dataset(&dir.path().join("data")).unwrap();
    dir
}

#[test]
fn evaluate_defaults_to_the_rate_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (p, a) = (dir.path().join("p.csv"), dir.path().join("a.csv"));
    write_rates(&p, &[(30, 0.2), (31, 0.5), (32, 0.4)]);
    write_rates(&a, &[(30, 0.2), (31, 0.3), (32, 0.6)]);
    let o = simforge(&["evaluate", "--predicted", s(&p), "--actual", s(&a)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = stdout_json(&o);
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    assert_eq!(keys, ["rmse", "peak_rate_error", "time_to_peak_error", "curve_correlation"]);
    let expected = ((0.0f64 + 0.04 + 0.04) / 3.0).sqrt();
    assert!((v["rmse"].as_f64().unwrap() - expected).abs() < 1e-12);
    assert!((v["peak_rate_error"].as_f64().unwrap() - 0.1).abs() < 1e-12);
    assert_eq!(v["time_to_peak_error"], 1);
}

#[test]
fn evaluate_reports_mismatched_days() {
    let dir = tempfile::tempdir().unwrap();
    let (p, a) = (dir.path().join("p.csv"), dir.path().join("a.csv"));
    write_rates(&p, &[(30, 0.2), (31, 0.5)]);
    write_rates(&a, &[(30, 0.2), (32, 0.5)]);
    let o = simforge(&["evaluate", "--predicted", s(&p), "--actual", s(&a)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("only in predicted: [31]") && err.contains("only in actual: [32]"), "{err}");
}

#[test]
fn evaluate_rejects_unknown_metrics_and_bad_weights() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    write_rates(&p, &[(30, 0.2), (31, 0.5)]);
    let o = simforge(&["evaluate", "--predicted", s(&p), "--actual", s(&p), "--metrics", "rmse,bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"));

    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"composite": {"weights": {"rmse": 0.7}, "correlation_weight": 0.3}}"#).unwrap();
    let o = simforge(&["evaluate", "--predicted", s(&p), "--actual", s(&p), "--config", s(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = stdout_json(&o);
    assert!((v["composite_score"].as_f64().unwrap() - 0.3).abs() < 1e-12);

    fs::write(&cfg, r#"{"composite": {"weights": {"rmse": 0.5}}}"#).unwrap();
    let o = simforge(&["evaluate", "--predicted", s(&p), "--actual", s(&p), "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_mobility_metrics_on_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.csv");
    fs::write(
        &t,
        "trajectory_id,day,time_minutes,location_id,x,y,activity\n\
         a,0,480,home,0,0,home\na,0,540,work,1200,0,work\na,0,1020,home,0,0,home\n\
         b,0,420,home,100,100,home\nb,0,600,shop,900,100,shop\n",
    )
    .unwrap();
    let o = simforge(&["evaluate", "--predicted", s(&t), "--actual", s(&t), "--metrics", "sd,si,dard,stvd"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = stdout_json(&o);
    for k in ["sd", "si", "dard", "stvd"] {
        assert_eq!(v[k].as_f64().unwrap(), 0.0, "{k}");
    }
    let o = simforge(&["evaluate", "--predicted", s(&t), "--actual", s(&t), "--metrics", "sd,rmse"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gen_data_writes_a_manifest_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = simforge(&["gen-data", "--agents", "60", "--seed", "11", "--out", s(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        (out, stdout_json(&o))
    };
    let (a, manifest) = run("a");
    let (b, _) = run("b");
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 4);
    for f in files {
        let path = Path::new(f["path"].as_str().unwrap());
        assert_eq!(fs::metadata(path).unwrap().len(), f["bytes"].as_u64().unwrap());
        let name = path.file_name().unwrap();
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
    }
    let empty = dir.path().join("empty");
    let o = simforge(&["gen-data", "--agents", "0", "--out", s(&empty)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(empty.join("ground_truth.csv").is_file());
}

#[test]
fn gen_data_rejects_bad_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.json");
    fs::write(&params, r#"{"seed_fraction": 2.5}"#).unwrap();
    let o = simforge(&["gen-data", "--agents", "10", "--params", s(&params), "--out", s(&dir.path().join("d"))]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn run_validates_before_writing() {
    let env = mask_env();
    let out = env.path().join("run");
    let task = env.path().join("task.md");
    let o = simforge(&["run", "--task", s(&task), "--out", s(&out), "--backend", "replay"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("transcript"));
    let o = simforge(&[
        "run", "--task", s(&task), "--out", s(&out), "--backend", "replay", "--transcript",
        s(&transcript_path()), "--max-iterations", "0",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = simforge(&["run", "--task", s(&env.path().join("missing.md")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn run_resolves_the_task_data_folder() {
    let env = mask_env();
    let out = env.path().join("run");
    let task = env.path().join("task.md");
    let (transcript, truth) = (transcript_path(), env.path().join("data/ground_truth.csv"));
    let args = [
        "run", "--task", s(&task), "--out", s(&out), "--backend", "replay", "--transcript", s(&transcript),
        "--ground-truth", s(&truth),
    ];
    let o = simforge(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = stdout_json(&o);
    assert_eq!(v["iterations_run"], 3);
    assert_eq!(v["stop_reason"]["kind"], "decision");
    assert!(Path::new(v["final_code_path"].as_str().unwrap()).is_file());
    let cfg: Value = serde_json::from_str(&fs::read_to_string(out.join("run_config.json")).unwrap()).unwrap();
    assert_eq!(Path::new(cfg["data_dir"].as_str().unwrap()), fs::canonicalize(env.path().join("data")).unwrap());
    assert_eq!(cfg["reproducible"], true);

    let again = simforge(&args);
    assert_eq!(again.status.code(), Some(2));
    assert!(stderr(&again).contains("already holds a run"));

    let resumed = simforge(&["resume", "--out", s(&out)]);
    assert!(resumed.status.success(), "{}", stderr(&resumed));
    assert!(stderr(&resumed).contains("already finished"));
    assert_eq!(stdout_json(&resumed)["already_finished"], true);
}

#[test]
fn run_without_a_data_folder_fails_when_it_is_missing() {
    let env = mask_env();
    fs::remove_dir_all(env.path().join("data")).unwrap();
    let o = simforge(&[
        "run", "--task", s(&env.path().join("task.md")), "--out", s(&env.path().join("run")), "--backend",
        "replay", "--transcript", s(&transcript_path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--data"));
}

#[test]
fn resume_of_an_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = simforge(&["resume", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("run_config.json"));
}

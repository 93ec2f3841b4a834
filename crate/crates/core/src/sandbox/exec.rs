use std::ffi::OsString;
use std::fs;
use std::io::{self, Read};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use landlock::{
    path_beneath_rules, AccessFs, AccessNet, Ruleset, RulesetAttr, RulesetCreated, RulesetCreatedAttr, ABI,
};
use serde::{Deserialize, Serialize};
use tempfile::TempDir;

use super::{SandboxConfig, SandboxError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Success,
    Timeout,
    NonzeroExit,
    LaunchFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub status: ExecStatus,
    pub exit_code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
    /// Seconds.
    pub wall_clock: f64,
    /// Megabytes.
    pub peak_memory: Option<f64>,
    /// Files the run created, relative to its workspace, sorted.
    pub produced_files: Vec<PathBuf>,
}

impl ExecutionRecord {
    fn launch_failure(message: String) -> Self {
        ExecutionRecord {
            status: ExecStatus::LaunchFailure,
            exit_code: None,
            stdout: String::new(),
            stderr: message,
            wall_clock: 0.0,
            peak_memory: None,
            produced_files: Vec::new(),
        }
    }
}

/// A finished run and the workspace it ran in. The workspace is deleted when
/// this value is dropped.
pub struct SandboxRun {
    pub record: ExecutionRecord,
    pub workspace: TempDir,
}

impl SandboxRun {
    /// Copies produced files into `dest`, keeping relative paths.
    pub fn export_produced(&self, dest: &Path) -> io::Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for rel in &self.record.produced_files {
            let target = dest.join(rel);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::copy(self.workspace.path().join(rel), &target)?;
            out.push(target);
        }
        Ok(out)
    }
}

const PROJECT_ROOT_MARKER: &str = "<project_root>";
const WORKSPACE_MARKER: &str = "<workspace>";
const MAX_STREAM_BYTES: usize = 1 << 20;
const POLL: Duration = Duration::from_millis(5);

/// Environment variables telling the program where its data lives: joining
/// `PROJECT_ROOT` and `DATA_PATH` yields the data directory.
pub fn data_env(data_dir: Option<&Path>, workspace: &Path) -> Vec<(String, String)> {
    let (root, rel) = match data_dir.and_then(|d| Some((d.parent()?, d.file_name()?))) {
        Some((parent, name)) => (parent.to_path_buf(), name.to_string_lossy().into_owned()),
        None => (workspace.to_path_buf(), ".".to_string()),
    };
    vec![
        ("PROJECT_ROOT".into(), root.to_string_lossy().into_owned()),
        ("DATA_PATH".into(), rel),
    ]
}

fn landlock_ruleset(workspace: &Path) -> Result<RulesetCreated, landlock::RulesetError> {
    let abi = ABI::V5;
    let write = AccessFs::from_write(abi);
    Ruleset::default()
        .handle_access(write)?
        .handle_access(AccessNet::BindTcp | AccessNet::ConnectTcp)?
        .create()?
        .add_rules(path_beneath_rules([workspace], write))?
        .add_rules(path_beneath_rules(["/dev/null"], write))
}

fn spawn_reader<R: Read + Send + 'static>(mut stream: R) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match stream.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = MAX_STREAM_BYTES.saturating_sub(kept.len());
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        kept
    })
}

fn sanitize(text: &[u8], workspace: &Path, data_dir: Option<&Path>) -> String {
    let mut s = String::from_utf8_lossy(text).into_owned();
    let ws = workspace.to_string_lossy();
    s = s.replace(ws.as_ref(), WORKSPACE_MARKER);
    if let Some(root) = data_dir.and_then(Path::parent) {
        let root = root.to_string_lossy();
        if root.len() > 1 {
            s = s.replace(root.as_ref(), PROJECT_ROOT_MARKER);
        }
    }
    s
}

fn list_files(root: &Path, skip: &[PathBuf]) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(root)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .filter_map(|e| e.path().strip_prefix(root).ok().map(Path::to_path_buf))
        .filter(|rel| !skip.contains(rel))
        .filter(|rel| !rel.components().any(|c| c.as_os_str() == "__pycache__"))
        .collect();
    files.sort();
    files
}

struct Exit {
    code: Option<i32>,
    maxrss_kb: i64,
    timed_out: bool,
}

fn wait_with_deadline(pid: libc::pid_t, budget: Duration, started: Instant) -> io::Result<Exit> {
    let mut status = 0;
    // SAFETY: zeroed rusage is a valid out-parameter for wait4.
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    let mut timed_out = false;
    loop {
        // SAFETY: pid is our direct child; status and usage are valid pointers.
        let r = unsafe { libc::wait4(pid, &mut status, libc::WNOHANG, &mut usage) };
        if r == pid {
            break;
        }
        if r < 0 {
            let err = io::Error::last_os_error();
            if err.kind() == io::ErrorKind::Interrupted {
                continue;
            }
            return Err(err);
        }
        if !timed_out && started.elapsed() >= budget {
            timed_out = true;
            // SAFETY: the child leads its own process group.
            unsafe { libc::killpg(pid, libc::SIGKILL) };
        }
        thread::sleep(POLL);
    }
    let code = if libc::WIFEXITED(status) {
        Some(libc::WEXITSTATUS(status))
    } else if libc::WIFSIGNALED(status) {
        Some(128 + libc::WTERMSIG(status))
    } else {
        None
    };
    Ok(Exit {
        code,
        maxrss_kb: usage.ru_maxrss,
        timed_out,
    })
}

/// Runs `args` under the interpreter inside `workspace`.
pub(crate) fn run_in(
    workspace: TempDir,
    args: &[OsString],
    data_dir: Option<&Path>,
    env_extra: &[(String, String)],
    cfg: &SandboxConfig,
    skip: &[PathBuf],
) -> SandboxRun {
    let ws = workspace.path().to_path_buf();
    let tmp = ws.join(".tmp");
    if let Err(e) = fs::create_dir_all(&tmp) {
        return SandboxRun {
            record: ExecutionRecord::launch_failure(format!("cannot prepare workspace: {e}")),
            workspace,
        };
    }
    let mut cmd = Command::new(&cfg.interpreter);
    cmd.args(args)
        .current_dir(&ws)
        .env_clear()
        .env("PATH", "/usr/local/bin:/usr/bin:/bin")
        .env("HOME", &ws)
        .env("TMPDIR", &tmp)
        .env("LANG", "C.UTF-8")
        .env("PYTHONHASHSEED", "0")
        .env("PYTHONDONTWRITEBYTECODE", "1")
        .env("PYTHONUNBUFFERED", "1")
        .env("MPLBACKEND", "Agg")
        .env("MPLCONFIGDIR", &tmp)
        .env("OMP_NUM_THREADS", "1")
        .env("OPENBLAS_NUM_THREADS", "1")
        .env("MKL_NUM_THREADS", "1")
        .envs(data_env(data_dir, &ws))
        .envs(env_extra.iter().map(|(k, v)| (k, v)))
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());

    let mut ruleset = match landlock_ruleset(&ws) {
        Ok(r) => Some(r),
        Err(e) => {
            tracing::warn!(error = %e, "landlock ruleset unavailable; filesystem confinement relies on the workspace cwd only");
            None
        }
    };
    let memory_bytes = cfg.memory_mb.saturating_mul(1024 * 1024);
    // SAFETY: the closure runs between fork and exec and only issues raw
    // syscalls; Landlock's restrict_self does not allocate on success.
    unsafe {
        cmd.pre_exec(move || {
            if libc::setpgid(0, 0) != 0 {
                return Err(io::Error::last_os_error());
            }
            let limit = libc::rlimit {
                rlim_cur: memory_bytes as libc::rlim_t,
                rlim_max: memory_bytes as libc::rlim_t,
            };
            if libc::setrlimit(libc::RLIMIT_AS, &limit) != 0 {
                return Err(io::Error::last_os_error());
            }
            if libc::unshare(libc::CLONE_NEWNET) != 0 {
                // Unprivileged fallback; the Landlock network rules still apply.
                libc::unshare(libc::CLONE_NEWUSER | libc::CLONE_NEWNET);
            }
            if let Some(r) = ruleset.take() {
                r.restrict_self().map_err(|_| io::Error::from_raw_os_error(libc::EPERM))?;
            }
            Ok(())
        });
    }

    let started = Instant::now();
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => {
            return SandboxRun {
                record: ExecutionRecord::launch_failure(format!("failed to start {}: {e}", cfg.interpreter)),
                workspace,
            }
        }
    };
    let out = spawn_reader(child.stdout.take().expect("piped stdout"));
    let err = spawn_reader(child.stderr.take().expect("piped stderr"));
    let pid = child.id() as libc::pid_t;
    let exit = wait_with_deadline(pid, cfg.wall_clock, started);
    let wall_clock = started.elapsed().as_secs_f64();
    // Reap anything the program left running in its group.
    // SAFETY: the group id is the child's pid; failure just means it is gone.
    unsafe { libc::killpg(pid, libc::SIGKILL) };
    let stdout = sanitize(&out.join().unwrap_or_default(), &ws, data_dir);
    let mut stderr = sanitize(&err.join().unwrap_or_default(), &ws, data_dir);

    let (status, exit_code, peak) = match exit {
        Ok(e) if e.timed_out => (ExecStatus::Timeout, e.code, Some(e.maxrss_kb as f64 / 1024.0)),
        Ok(e) if e.code == Some(0) => (ExecStatus::Success, Some(0), Some(e.maxrss_kb as f64 / 1024.0)),
        Ok(e) => (ExecStatus::NonzeroExit, e.code, Some(e.maxrss_kb as f64 / 1024.0)),
        Err(e) => {
            stderr.push_str(&format!("\nsupervisor could not wait for the child: {e}"));
            (ExecStatus::NonzeroExit, None, None)
        }
    };
    let mut skip = skip.to_vec();
    skip.extend(list_files(&tmp, &[]).into_iter().map(|p| Path::new(".tmp").join(p)));
    let produced_files = list_files(&ws, &skip);
    SandboxRun {
        record: ExecutionRecord {
            status,
            exit_code,
            stdout,
            stderr,
            wall_clock,
            peak_memory: peak,
            produced_files,
        },
        workspace,
    }
}

/// Runs the program at `code_path` in a fresh workspace.
pub fn execute(
    code_path: &Path,
    data_dir: Option<&Path>,
    env_extra: &[(String, String)],
    cfg: &SandboxConfig,
) -> SandboxRun {
    let workspace = match tempfile::Builder::new().prefix("simforge-run-").tempdir() {
        Ok(w) => w,
        Err(e) => {
            return SandboxRun {
                record: ExecutionRecord::launch_failure(format!("cannot create workspace: {e}")),
                workspace: TempDir::new().expect("fallback temp dir"),
            }
        }
    };
    let name = PathBuf::from(code_path.file_name().unwrap_or_else(|| "program.py".as_ref()));
    if let Err(e) = fs::copy(code_path, workspace.path().join(&name)) {
        return SandboxRun {
            record: ExecutionRecord::launch_failure(format!("cannot stage {}: {e}", code_path.display())),
            workspace,
        };
    }
    run_in(workspace, &[name.clone().into_os_string()], data_dir, env_extra, cfg, &[name])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseCheck {
    pub ok: bool,
    pub diagnostic: Option<String>,
}

const PARSE_FILE: &str = "program.py";

/// Parses `program` with the interpreter without running it.
pub fn parse_check(program: &str, cfg: &SandboxConfig) -> Result<ParseCheck, SandboxError> {
    let workspace = tempfile::Builder::new()
        .prefix("simforge-parse-")
        .tempdir()
        .map_err(SandboxError::Io)?;
    fs::write(workspace.path().join(PARSE_FILE), program).map_err(SandboxError::Io)?;
    let mut args: Vec<OsString> = cfg.parse_args.iter().map(OsString::from).collect();
    args.push(PARSE_FILE.into());
    let parse_cfg = SandboxConfig {
        wall_clock: cfg.wall_clock.min(Duration::from_secs(60)),
        ..cfg.clone()
    };
    let run = run_in(workspace, &args, None, &[], &parse_cfg, &[]);
    let rec = run.record;
    match rec.status {
        ExecStatus::Success => Ok(ParseCheck {
            ok: true,
            diagnostic: None,
        }),
        ExecStatus::LaunchFailure => Err(SandboxError::Interpreter(rec.stderr)),
        ExecStatus::Timeout => Ok(ParseCheck {
            ok: false,
            diagnostic: Some("parse check timed out".into()),
        }),
        ExecStatus::NonzeroExit => Ok(ParseCheck {
            ok: false,
            diagnostic: Some(rec.stderr.trim().to_string()),
        }),
    }
}

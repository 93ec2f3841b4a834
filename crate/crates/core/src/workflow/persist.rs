//! On-disk layout of a run directory.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::WorkflowError;
use crate::artifacts::to_pretty_json;
use crate::feedback::code_file_name;

pub const RUN_CONFIG: &str = "run_config.json";
pub const FINAL_STATE: &str = "final_state.json";
pub const FIX_LOG: &str = "fix_log.json";
pub const ITERATION_META: &str = "iteration_meta.json";
pub const SIM_OUTPUT: &str = "sim_output";

pub fn iter_dir_name(iteration: usize) -> String {
    format!("iter_{iteration}")
}

pub fn iter_dir(out: &Path, iteration: usize) -> PathBuf {
    out.join(iter_dir_name(iteration))
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> WorkflowError + '_ {
    move |source| WorkflowError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes through a sibling temporary file so a crash never leaves a
/// truncated document behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), WorkflowError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let tmp = path.with_extension("partial");
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, doc: &T) -> Result<(), WorkflowError> {
    write_atomic(path, &to_pretty_json(doc))
}

/// Saves `doc` as `<out>/iter_<N>/<name>.json`, replacing any earlier save.
pub fn save_artifact<T: Serialize + ?Sized>(
    out: &Path,
    name: &str,
    iteration: usize,
    doc: &T,
) -> Result<PathBuf, WorkflowError> {
    let path = iter_dir(out, iteration).join(format!("{name}.json"));
    write_json(&path, doc)?;
    Ok(path)
}

/// Saves an unusable model reply as `<name>.raw.txt`.
pub fn save_raw(out: &Path, name: &str, iteration: usize, raw: &str) -> Result<PathBuf, WorkflowError> {
    let path = iter_dir(out, iteration).join(format!("{name}.raw.txt"));
    write_atomic(&path, raw)?;
    Ok(path)
}

/// Path of the program file relative to the run directory.
pub fn code_rel_path(iteration: usize, suffix: &str) -> PathBuf {
    PathBuf::from(iter_dir_name(iteration)).join(code_file_name(iteration, suffix))
}

pub fn save_code(out: &Path, iteration: usize, suffix: &str, code: &str) -> Result<PathBuf, WorkflowError> {
    let path = out.join(code_rel_path(iteration, suffix));
    write_atomic(&path, code)?;
    Ok(path)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, WorkflowError> {
    let text = fs::read_to_string(path).map_err(|e| WorkflowError::Resume {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| WorkflowError::Resume {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Iteration directories present under `out`, by index.
pub fn iteration_dirs(out: &Path) -> Result<Vec<usize>, WorkflowError> {
    let mut found = Vec::new();
    for entry in fs::read_dir(out).map_err(io_err(out))? {
        let entry = entry.map_err(io_err(out))?;
        let name = entry.file_name();
        if let Some(n) = name.to_str().and_then(|s| s.strip_prefix("iter_")).and_then(|s| s.parse().ok()) {
            if entry.path().is_dir() {
                found.push(n);
            }
        }
    }
    found.sort_unstable();
    Ok(found)
}

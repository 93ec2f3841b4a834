//! Data directory inspection: catalog, selection, integrity checks, head
//! samples and the model-written summaries that feed the analysis prompt.

mod analyze;
mod integrity;
mod sample;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifacts::TaskSpec;

pub use analyze::{
    analyze, llm_integrity_check, pearson, semantic_summary, validate_relationships, AnalysisOutcome, AnalyzeError,
    AnalyzeOptions, DATA_ANALYSIS, INTEGRITY_CHECK, SEMANTIC_SUMMARY,
};
pub use integrity::{check_integrity, robust_outliers, Finding, FindingSeverity, IntegrityReport};
pub use sample::{sample_head, sample_head_from, HeadSample, HEAD_RECORDS, VALUE_BUDGET};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot sample {path}: {message}")]
    Sample { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    Csv,
    Json,
    Geojson,
    Pickle,
    SourceText,
    Other,
}

impl FileFormat {
    pub fn from_path(path: &Path) -> Self {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "csv" => FileFormat::Csv,
            "json" => FileFormat::Json,
            "geojson" => FileFormat::Geojson,
            "pkl" | "pickle" | "pk" | "npy" | "npz" => FileFormat::Pickle,
            "py" | "txt" | "md" | "r" | "jl" | "yaml" | "yml" | "toml" | "ini" | "cfg" | "sh" => FileFormat::SourceText,
            _ => FileFormat::Other,
        }
    }

    pub fn is_json(self) -> bool {
        matches!(self, FileFormat::Json | FileFormat::Geojson)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    /// Path relative to the data directory, `/`-separated.
    pub path: String,
    pub format: FileFormat,
    pub size: u64,
}

impl CatalogEntry {
    pub fn file_name(&self) -> &str {
        self.path.rsplit('/').next().unwrap_or(&self.path)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileCatalog {
    pub root: PathBuf,
    pub files: Vec<CatalogEntry>,
}

impl FileCatalog {
    pub fn absolute(&self, entry: &CatalogEntry) -> PathBuf {
        self.root.join(&entry.path)
    }
}

/// Every regular file under `data_dir`, recursively, sorted by path.
pub fn list_available_files(data_dir: &Path) -> Result<FileCatalog, DataError> {
    let io_err = |source| DataError::Io {
        path: data_dir.to_path_buf(),
        source,
    };
    fs::read_dir(data_dir).map_err(io_err)?;
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(data_dir).sort_by_file_name() {
        let entry = entry.map_err(|e| DataError::Io {
            path: e.path().unwrap_or(data_dir).to_path_buf(),
            source: e.into_io_error().unwrap_or_else(|| io::Error::other("filesystem loop")),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(data_dir).unwrap_or(entry.path());
        let rel: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
        files.push(CatalogEntry {
            path: rel.join("/"),
            format: FileFormat::from_path(entry.path()),
            size: entry.metadata().map(|m| m.len()).unwrap_or(0),
        });
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(FileCatalog {
        root: data_dir.to_path_buf(),
        files,
    })
}

/// The catalog entries named by the task, or the whole catalog when the task
/// names none. A named file matches by relative path or by file name. Names
/// with no match come back as warnings.
pub fn select_files(catalog: &FileCatalog, task_spec: &TaskSpec) -> (Vec<CatalogEntry>, Vec<String>) {
    let named = match task_spec.data_files.as_deref() {
        Some(list) if !list.is_empty() => list,
        _ => return (catalog.files.clone(), Vec::new()),
    };
    let mut selected: Vec<CatalogEntry> = Vec::new();
    let mut warnings = Vec::new();
    for f in named {
        let name = f.name.trim();
        let hits: Vec<&CatalogEntry> = catalog
            .files
            .iter()
            .filter(|e| e.path == name || e.file_name() == name)
            .collect();
        if hits.is_empty() {
            warnings.push(format!("data file {name} named by the task is not in the data directory; skipped"));
        }
        for h in hits {
            if !selected.contains(h) {
                selected.push(h.clone());
            }
        }
    }
    (selected, warnings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifacts::Artifact;

    fn spec(files: Option<&[&str]>) -> TaskSpec {
        let mut v = serde_json::json!({"title": "t", "description": "d", "simulation_type": "s", "entities": []});
        if let Some(files) = files {
            v["data_files"] = files.iter().map(|n| serde_json::json!({"name": n})).collect();
        }
        TaskSpec::from_value(v).unwrap()
    }

    #[test]
    fn catalog_recurses_and_classifies() {
        let dir = tempfile::tempdir().unwrap();
        assert!(list_available_files(dir.path()).unwrap().files.is_empty());
        fs::write(dir.path().join("a.csv"), "x\n1\n").unwrap();
        fs::write(dir.path().join("b.json"), "{}").unwrap();
        fs::create_dir(dir.path().join("geo")).unwrap();
        fs::write(dir.path().join("geo/x.geojson"), "{}").unwrap();
        fs::write(dir.path().join("blob.bin"), [0u8, 1]).unwrap();
        let cat = list_available_files(dir.path()).unwrap();
        let got: Vec<(&str, FileFormat)> = cat.files.iter().map(|e| (e.path.as_str(), e.format)).collect();
        assert_eq!(
            got,
            [
                ("a.csv", FileFormat::Csv),
                ("b.json", FileFormat::Json),
                ("blob.bin", FileFormat::Other),
                ("geo/x.geojson", FileFormat::Geojson)
            ]
        );
        assert!(list_available_files(&dir.path().join("missing")).is_err());
    }

    #[test]
    fn selection_by_task_names() {
        let dir = tempfile::tempdir().unwrap();
        for f in ["a.csv", "b.csv", "c.json", "d.csv", "e.txt"] {
            fs::write(dir.path().join(f), "x").unwrap();
        }
        let cat = list_available_files(dir.path()).unwrap();
        let (sel, warn) = select_files(&cat, &spec(Some(&["a.csv", "c.json", "e.txt"])));
        assert_eq!(sel.len(), 3);
        assert!(warn.is_empty());
        let (sel, warn) = select_files(&cat, &spec(None));
        assert_eq!((sel.len(), warn.len()), (5, 0));
        let (sel, warn) = select_files(&cat, &spec(Some(&["a.csv", "missing.csv"])));
        assert_eq!(sel.len(), 1);
        assert!(warn[0].contains("missing.csv"));
    }
}

use std::path::Path;

use indexmap::IndexMap;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use super::integrity::{check_integrity, Finding, FindingSeverity, IntegrityReport};
use super::sample::{sample_head, HeadSample};
use super::{list_available_files, select_files, CatalogEntry, DataError, FileCatalog, FileFormat};
use crate::agent::{parse_artifact, AgentError, AgentRuntime, Bindings, PromptId};
use crate::artifacts::{normalize_data_analysis, DataAnalysisReport, TaskSpec};

pub const DATA_ANALYSIS: &str = "data_analysis";
pub const SEMANTIC_SUMMARY: &str = "data_analysis.semantic_summary";
pub const INTEGRITY_CHECK: &str = "data_analysis.integrity_check";

/// Correlations weaker than this are treated as having no direction.
const MIN_DIRECTIONAL_CORRELATION: f64 = 0.05;

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("no data files selected for analysis")]
    NoFiles,
    #[error("every selected data file failed integrity checks: {}", summarize(.0))]
    AllFailed(Vec<IntegrityReport>),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

fn summarize(reports: &[IntegrityReport]) -> String {
    reports
        .iter()
        .map(|r| {
            let errors = r.findings.iter().filter(|f| f.severity == FindingSeverity::Error).count();
            format!("{} ({errors} errors)", r.file)
        })
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AnalyzeOptions {
    /// Also ask the model to inspect each sample. Its findings are warnings only.
    pub llm_integrity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisOutcome {
    pub report: DataAnalysisReport,
    pub catalog: FileCatalog,
    pub selected: Vec<CatalogEntry>,
    pub integrity: Vec<IntegrityReport>,
    pub warnings: Vec<String>,
}

/// Asks the model to describe one sampled file.
pub fn semantic_summary(rt: &AgentRuntime, sample: &HeadSample, task_description: &str) -> Result<String, AgentError> {
    if sample.is_empty() {
        return Err(AgentError::Stage {
            agent: SEMANTIC_SUMMARY.into(),
            message: format!("sample of {} is empty", sample.file),
        });
    }
    let b = Bindings::new()
        .text("task_description", task_description)
        .text("file_name", sample.file.as_str())
        .text("sample", sample.excerpt.as_str());
    Ok(rt.call(SEMANTIC_SUMMARY, PromptId::SemanticSummary, &b)?.trim().to_string())
}

/// Model review of a sample. Unparseable replies yield no findings.
pub fn llm_integrity_check(rt: &AgentRuntime, sample: &HeadSample) -> Result<Vec<Finding>, AgentError> {
    let b = Bindings::new()
        .text("file_name", sample.file.as_str())
        .text("sample", sample.excerpt.as_str());
    let doc = match rt.call_json(INTEGRITY_CHECK, PromptId::IntegrityCheck, &b) {
        Ok((doc, _)) => doc,
        Err(AgentError::Parse { .. }) => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let findings = doc
        .get("findings")
        .and_then(Value::as_array)
        .map(|items| {
            items
                .iter()
                .filter_map(|f| {
                    let text = |k: &str| f.get(k).and_then(Value::as_str).unwrap_or("").trim().to_string();
                    let detail = text("detail");
                    (!detail.is_empty()).then(|| Finding {
                        severity: FindingSeverity::Warning,
                        kind: format!("llm:{}", text("kind")),
                        location: "sample".into(),
                        detail,
                    })
                })
                .collect()
        })
        .unwrap_or_default();
    Ok(findings)
}

/// Sample Pearson correlation; `None` for fewer than two points or a
/// constant series.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs[..n].iter().zip(&ys[..n]) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Paired numeric values of two columns, by case-insensitive header name.
fn column_pairs(path: &Path, a: &str, b: &str) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::Reader::from_path(path).ok()?;
    let headers = rdr.headers().ok()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name.trim()));
    let (ia, ib) = (find(a)?, find(b)?);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for rec in rdr.records().filter_map(Result::ok) {
        let num = |i: usize| rec.get(i)?.trim().parse::<f64>().ok().filter(|v| v.is_finite());
        if let (Some(x), Some(y)) = (num(ia), num(ib)) {
            xs.push(x);
            ys.push(y);
        }
    }
    Some((xs, ys))
}

/// Checks each claimed two-variable relationship against the linear
/// correlation in any CSV holding both columns. Returns a warning per
/// contradiction.
pub fn validate_relationships(report: &DataAnalysisReport, csv_files: &[(String, &Path)]) -> Vec<String> {
    let mut warnings = Vec::new();
    for rel in &report.data_summary.key_relationships {
        let [a, b] = rel.variables.as_slice() else { continue };
        let Some(claimed) = rel.claimed_sign() else { continue };
        for (name, path) in csv_files {
            let Some((xs, ys)) = column_pairs(path, a, b) else { continue };
            let Some(r) = pearson(&xs, &ys) else { continue };
            if r.abs() >= MIN_DIRECTIONAL_CORRELATION && (r > 0.0) != claimed {
                warnings.push(format!(
                    "claimed {} relationship between {a} and {b} contradicts correlation {r:.3} in {name}",
                    if claimed { "positive" } else { "negative" }
                ));
            }
        }
    }
    warnings
}

fn schema_for<'a>(task_spec: &'a TaskSpec, entry: &CatalogEntry) -> Option<&'a Value> {
    task_spec
        .data_files
        .as_deref()?
        .iter()
        .find(|f| f.name == entry.path || f.name == entry.file_name())?
        .extra
        .get("schema")
        .filter(|s| s.is_object())
}

fn finding_line(file: &str, f: &Finding) -> String {
    format!("{file}: {} at {}: {}", f.kind, f.location, f.detail)
}

/// Catalog, select, check, sample and summarize each file, then ask for the
/// overall analysis. Files run one at a time so replay order is fixed.
pub fn analyze(
    rt: &AgentRuntime,
    data_dir: &Path,
    task_spec: &TaskSpec,
    opts: AnalyzeOptions,
) -> Result<AnalysisOutcome, AnalyzeError> {
    let catalog = list_available_files(data_dir)?;
    let (selected, mut warnings) = select_files(&catalog, task_spec);
    if selected.is_empty() {
        return Err(AnalyzeError::NoFiles);
    }
    let mut integrity = Vec::new();
    let mut summaries: IndexMap<String, String> = IndexMap::new();
    let mut integrity_warnings = Vec::new();
    let mut passing_csv = Vec::new();
    for entry in &selected {
        let path = catalog.absolute(entry);
        let report = check_integrity(&path, &entry.path, entry.format, schema_for(task_spec, entry));
        let passed = report.passed;
        integrity_warnings.extend(report.warnings().map(|f| finding_line(&entry.path, f)));
        integrity.push(report);
        if !passed {
            warnings.push(format!("{} failed integrity checks and is excluded", entry.path));
            continue;
        }
        let sample = match sample_head(&path, &entry.path, entry.format) {
            Ok(s) => s,
            Err(e) => {
                warnings.push(format!("{e}; file excluded"));
                continue;
            }
        };
        if opts.llm_integrity {
            let found = llm_integrity_check(rt, &sample)?;
            integrity_warnings.extend(found.iter().map(|f| finding_line(&entry.path, f)));
        }
        let summary = semantic_summary(rt, &sample, &task_spec.description)?;
        summaries.insert(entry.path.clone(), summary);
        if entry.format == FileFormat::Csv {
            passing_csv.push((entry.path.clone(), path));
        }
    }
    if summaries.is_empty() {
        return Err(AnalyzeError::AllFailed(integrity));
    }

    let analysis_results = json!({
        "file_summaries": summaries,
        "integrity_warnings": integrity_warnings,
    });
    let b = Bindings::new()
        .json("task_spec", Some(task_spec))
        .json("analysis_results", Some(&analysis_results));
    let (doc, raw) = rt.call_json(DATA_ANALYSIS, PromptId::DataAnalysis, &b)?;
    let mut report: DataAnalysisReport = parse_artifact(DATA_ANALYSIS, normalize_data_analysis(doc), raw)?;
    report.file_summaries = summaries;
    let csv_refs: Vec<(String, &Path)> = passing_csv.iter().map(|(n, p)| (n.clone(), p.as_path())).collect();
    let contradictions = validate_relationships(&report, &csv_refs);
    if !contradictions.is_empty() {
        report.extra.insert("validation_warnings".into(), json!(contradictions));
    }
    Ok(AnalysisOutcome {
        report,
        catalog,
        selected,
        integrity,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(pearson(&[1.0, 1.0], &[1.0, 2.0]).is_none());
        assert!(pearson(&[1.0], &[1.0]).is_none());
    }
}

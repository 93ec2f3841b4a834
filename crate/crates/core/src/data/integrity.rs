use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::FileFormat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingSeverity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: FindingSeverity,
    pub kind: String,
    pub location: String,
    pub detail: String,
}

impl Finding {
    fn error(kind: &str, location: impl Into<String>, detail: impl Into<String>) -> Self {
        Finding {
            severity: FindingSeverity::Error,
            kind: kind.into(),
            location: location.into(),
            detail: detail.into(),
        }
    }

    fn warning(kind: &str, location: impl Into<String>, detail: impl Into<String>) -> Self {
        Finding {
            severity: FindingSeverity::Warning,
            ..Finding::error(kind, location, detail)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrityReport {
    pub file: String,
    pub findings: Vec<Finding>,
    pub passed: bool,
}

impl IntegrityReport {
    fn new(file: &str, findings: Vec<Finding>) -> Self {
        let passed = !findings.iter().any(|f| f.severity == FindingSeverity::Error);
        IntegrityReport {
            file: file.into(),
            findings,
            passed,
        }
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == FindingSeverity::Warning)
    }
}

/// Per-kind cap on individual findings; the remainder is reported as a count.
const MAX_FINDINGS_PER_KIND: usize = 20;
const OUTLIER_Z: f64 = 3.0;
/// Scales the median absolute deviation to a normal standard deviation.
const MAD_SCALE: f64 = 1.4826;

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan")
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Indices of values farther than three scaled MADs from the median. With a
/// zero MAD every value that differs from the median is flagged.
pub fn robust_outliers(values: &[f64]) -> Vec<usize> {
    if values.len() < 3 {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let med = median(&sorted);
    let mut dev: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let threshold = OUTLIER_Z * MAD_SCALE * median(&dev);
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| (*v - med).abs() > threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Pushes findings of one kind, keeping the first few and summarizing the rest.
fn push_capped(out: &mut Vec<Finding>, mut items: Vec<Finding>) {
    let extra = items.len().saturating_sub(MAX_FINDINGS_PER_KIND);
    items.truncate(MAX_FINDINGS_PER_KIND);
    let tail = items.last().cloned();
    out.extend(items);
    if let (Some(t), true) = (tail, extra > 0) {
        out.push(Finding {
            location: "file".into(),
            detail: format!("{extra} more {} findings not listed", t.kind),
            ..t
        });
    }
}

fn check_csv(bytes: &[u8]) -> Vec<Finding> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(bytes);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return vec![Finding::error("unreadable", "header", e.to_string())],
    };
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        return vec![Finding::error("unreadable", "header", "file has no header row")];
    }
    let mut missing = Vec::new();
    let mut columns: Vec<Vec<(usize, Option<f64>)>> = vec![Vec::new(); headers.len()];
    let mut numeric = vec![true; headers.len()];
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => return vec![Finding::error("malformed", format!("row {row}"), e.to_string())],
        };
        for (c, cell) in rec.iter().enumerate() {
            let name = headers.get(c).unwrap_or("?");
            if is_missing(cell) {
                missing.push(Finding::error(
                    "missing_value",
                    format!("row {row}, column {name}"),
                    format!("missing value {:?}", cell.trim()),
                ));
                columns[c].push((row, None));
                continue;
            }
            match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => columns[c].push((row, Some(v))),
                _ => numeric[c] = false,
            }
        }
    }
    let mut findings = Vec::new();
    push_capped(&mut findings, missing);
    for (c, col) in columns.iter().enumerate() {
        if !numeric[c] {
            continue;
        }
        let present: Vec<(usize, f64)> = col.iter().filter_map(|(r, v)| Some((*r, (*v)?))).collect();
        let values: Vec<f64> = present.iter().map(|(_, v)| *v).collect();
        let name = &headers[c];
        let outliers = robust_outliers(&values)
            .into_iter()
            .map(|i| {
                let (row, v) = present[i];
                Finding::warning("outlier", format!("row {row}, column {name}"), format!("value {v} is an outlier"))
            })
            .collect();
        push_capped(&mut findings, outliers);
    }
    findings
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(n) if n.is_i64() || n.is_u64() => "integer",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn type_matches(v: &Value, want: &str) -> bool {
    let got = type_name(v);
    got == want || (want == "number" && got == "integer")
}

/// A small schema subset: `type`, `required` and per-property `type`.
fn check_schema(doc: &Value, schema: &Value, at: &str, out: &mut Vec<Finding>) {
    if let Some(want) = schema.get("type").and_then(Value::as_str) {
        if !type_matches(doc, want) {
            out.push(Finding::error(
                "schema",
                at,
                format!("expected {want}, found {}", type_name(doc)),
            ));
            return;
        }
    }
    if let Some(required) = schema.get("required").and_then(Value::as_array) {
        for key in required.iter().filter_map(Value::as_str) {
            if doc.get(key).is_none() {
                out.push(Finding::error("schema", at, format!("required key {key:?} is missing")));
            }
        }
    }
    if let (Some(props), Some(obj)) = (schema.get("properties").and_then(Value::as_object), doc.as_object()) {
        for (key, sub) in props {
            if let Some(v) = obj.get(key) {
                check_schema(v, sub, &format!("{at}.{key}"), out);
            }
        }
    }
}

/// Rule-based checks over the file's bytes. `display` names the file in
/// the report.
pub fn check_integrity(path: &Path, display: &str, format: FileFormat, schema: Option<&Value>) -> IntegrityReport {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) => return IntegrityReport::new(display, vec![Finding::error("unreadable", "file", e.to_string())]),
    };
    let findings = match format {
        FileFormat::Csv => check_csv(&bytes),
        FileFormat::Json | FileFormat::Geojson => match serde_json::from_slice::<Value>(&bytes) {
            Ok(doc) => {
                let mut out = Vec::new();
                if let Some(s) = schema {
                    check_schema(&doc, s, "$", &mut out);
                }
                out
            }
            Err(e) => vec![Finding::error(
                "malformed",
                format!("line {}, column {}", e.line(), e.column()),
                e.to_string(),
            )],
        },
        FileFormat::Pickle if bytes.is_empty() => vec![Finding::error("empty", "file", "binary file is empty")],
        FileFormat::Pickle | FileFormat::Other => Vec::new(),
        FileFormat::SourceText => match std::str::from_utf8(&bytes) {
            Ok(_) => Vec::new(),
            Err(e) => vec![Finding::error(
                "undecodable",
                format!("byte {}", e.valid_up_to()),
                "file is not valid UTF-8",
            )],
        },
    };
    IntegrityReport::new(display, findings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn check(name: &str, body: &[u8], schema: Option<&Value>) -> IntegrityReport {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        check_integrity(&p, name, FileFormat::from_path(&p), schema)
    }

    #[test]
    fn one_missing_cell_fails() {
        let r = check("a.csv", b"x,y\n1,2\n3,\n", None);
        assert!(!r.passed);
        assert_eq!(r.findings.len(), 1);
        assert_eq!(r.findings[0].location, "row 2, column y");
        let r = check("a.csv", b"x,y\n1,NaN\n3,na\n", None);
        assert_eq!(r.findings.len(), 2);
    }

    #[test]
    fn outlier_warns_but_passes() {
        let r = check("a.csv", b"v\n1\n1\n1\n1\n100\n", None);
        assert!(r.passed);
        assert_eq!(r.findings.len(), 1);
        assert_eq!(r.findings[0].severity, FindingSeverity::Warning);
        assert_eq!(r.findings[0].location, "row 5, column v");
    }

    #[test]
    fn clean_csv_has_no_findings() {
        let r = check("a.csv", b"id,name,score\n1,a,0.5\n2,b,0.6\n3,c,0.55\n4,d,0.52\n", None);
        assert!(r.passed);
        assert!(r.findings.is_empty());
    }

    #[test]
    fn json_checks() {
        assert!(!check("a.json", b"{\"a\": ", None).passed);
        assert!(check("a.json", b"{\"a\": 1}", None).passed);
        let schema = json!({"type": "object", "required": ["a", "b"], "properties": {"a": {"type": "string"}}});
        let r = check("a.json", b"{\"a\": 1}", Some(&schema));
        assert_eq!(r.findings.len(), 2);
        assert!(check("a.geojson", b"{\"type\": \"FeatureCollection\"}", None).passed);
    }

    #[test]
    fn other_formats() {
        assert!(!check("a.pkl", b"", None).passed);
        assert!(check("a.pkl", b"\x80\x04K\x01.", None).passed);
        assert!(!check("a.txt", b"\xff\xfe", None).passed);
        assert!(!check("a.csv", b"a,b\n\xff,1\n", None).passed);
    }

    #[test]
    fn findings_are_capped() {
        let mut body = String::from("x,y\n");
        for _ in 0..50 {
            body.push_str("1,\n");
        }
        let r = check("a.csv", body.as_bytes(), None);
        assert_eq!(r.findings.len(), MAX_FINDINGS_PER_KIND + 1);
        assert!(r.findings.last().unwrap().detail.starts_with("30 more"));
    }

    #[test]
    fn robust_rule() {
        assert_eq!(robust_outliers(&[1.0, 2.0, 3.0, 4.0, 5.0]), Vec::<usize>::new());
        assert_eq!(robust_outliers(&[1.0, 2.0, 3.0, 2.0, 50.0]), vec![4]);
        assert!(robust_outliers(&[1.0, 50.0]).is_empty());
    }
}

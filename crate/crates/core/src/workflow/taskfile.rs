//! Parser for the structured task description file.
//!
//! The file is plain text or markdown with four labelled sections:
//! `Task Objective:`, `data_folder: "<path>"`, `data_files:` (bullets of the
//! form ``- `name`: description``) and `Evaluation Metrics:` (bold bullets
//! such as `- **RMSE:**`). The raw text is what the model sees; the parsed
//! parts only feed the data stage.

use crate::artifacts::{DataFileRef, Extra};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TaskFile {
    pub text: String,
    pub objective: String,
    pub data_folder: Option<String>,
    pub data_files: Vec<(String, String)>,
    pub evaluation_metrics: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    Objective,
    DataFiles,
    Metrics,
}

fn header(line: &str) -> Option<(Section, &str)> {
    let t = line.trim().trim_start_matches('#').trim().trim_matches('*');
    let lower = t.to_ascii_lowercase();
    for (name, section) in [
        ("task objective:", Section::Objective),
        ("data_files:", Section::DataFiles),
        ("evaluation metrics:", Section::Metrics),
    ] {
        if lower.starts_with(name) {
            return Some((section, t[name.len()..].trim()));
        }
    }
    None
}

fn unquote(s: &str) -> &str {
    s.trim().trim_matches(|c| c == '"' || c == '\'' || c == '`').trim()
}

/// `- `name`: description` → (name, description).
fn data_file_bullet(line: &str) -> Option<(String, String)> {
    let rest = line.trim().strip_prefix(['-', '*'])?.trim_start();
    let rest = rest.strip_prefix('`')?;
    let end = rest.find('`')?;
    let name = rest[..end].trim();
    let desc = rest[end + 1..].trim_start().trim_start_matches(':').trim();
    (!name.is_empty()).then(|| (name.to_string(), desc.to_string()))
}

/// `- **Name:**` with nothing after it names a metric; bold labels followed
/// by text are attributes of the metric above.
fn metric_bullet(line: &str) -> Option<String> {
    let rest = line.trim().strip_prefix(['-', '*'])?.trim_start();
    let inner = rest.strip_prefix("**")?;
    let end = inner.find("**")?;
    if !inner[end + 2..].trim().is_empty() {
        return None;
    }
    let name = inner[..end].trim().trim_end_matches(':').trim();
    (!name.is_empty()).then(|| name.to_string())
}

pub fn parse_task_file(text: &str) -> TaskFile {
    let mut tf = TaskFile {
        text: text.to_string(),
        ..TaskFile::default()
    };
    let mut section = Section::Preamble;
    let mut objective = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim();
        let lower = trimmed.to_ascii_lowercase();
        if let Some(v) = lower.strip_prefix("data_folder:").map(|_| &trimmed["data_folder:".len()..]) {
            let v = unquote(v);
            tf.data_folder = (!v.is_empty()).then(|| v.to_string());
            section = Section::Preamble;
            continue;
        }
        if let Some((s, tail)) = header(line) {
            section = s;
            if s == Section::Objective && !tail.is_empty() {
                objective.push(tail.to_string());
            }
            continue;
        }
        match section {
            Section::Objective => objective.push(line.to_string()),
            Section::DataFiles => tf.data_files.extend(data_file_bullet(line)),
            Section::Metrics => tf.evaluation_metrics.extend(metric_bullet(line)),
            Section::Preamble => {}
        }
    }
    tf.objective = objective.join("\n").trim().to_string();
    tf
}

impl TaskFile {
    /// The listed data files as task-spec references.
    pub fn data_file_refs(&self) -> Option<Vec<DataFileRef>> {
        (!self.data_files.is_empty()).then(|| {
            self.data_files
                .iter()
                .map(|(name, desc)| DataFileRef {
                    name: name.clone(),
                    description: (!desc.is_empty()).then(|| desc.clone()),
                    extra: Extra::new(),
                })
                .collect()
        })
    }
}

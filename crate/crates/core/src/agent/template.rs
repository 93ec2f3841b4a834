use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template {template}: unescaped {ch:?} at byte {offset}; write {ch}{ch} for a literal brace")]
    StrayBrace { template: String, ch: char, offset: usize },
    #[error("template {template}: no binding for placeholder {{{placeholder}}}")]
    MissingBinding { template: String, placeholder: String },
    #[error("template {template}: binding {name:?} matches no placeholder")]
    UnknownBinding { template: String, name: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(String),
}

/// A prompt body with `{name}` placeholders. `{{` and `}}` stand for literal
/// braces; any other brace is rejected when the template is parsed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    name: String,
    body: String,
    segments: Vec<Segment>,
    placeholders: BTreeSet<String>,
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

impl PromptTemplate {
    pub fn parse(name: impl Into<String>, body: impl Into<String>) -> Result<Self, TemplateError> {
        let name = name.into();
        let body = body.into();
        let bytes = body.as_bytes();
        let mut segments = Vec::new();
        let mut placeholders = BTreeSet::new();
        let mut text = String::new();
        let mut start = 0;
        let mut i = 0;
        let stray = |ch, offset| TemplateError::StrayBrace {
            template: name.clone(),
            ch,
            offset,
        };
        while i < bytes.len() {
            match bytes[i] {
                b'{' if bytes.get(i + 1) == Some(&b'{') => {
                    text.push_str(&body[start..i]);
                    text.push('{');
                    i += 2;
                    start = i;
                }
                b'}' if bytes.get(i + 1) == Some(&b'}') => {
                    text.push_str(&body[start..i]);
                    text.push('}');
                    i += 2;
                    start = i;
                }
                b'{' => {
                    let len = bytes[i + 1..].iter().take_while(|&&b| is_ident_byte(b)).count();
                    let close = i + 1 + len;
                    if len == 0 || bytes.get(close) != Some(&b'}') || bytes[i + 1].is_ascii_digit() {
                        return Err(stray('{', i));
                    }
                    text.push_str(&body[start..i]);
                    if !text.is_empty() {
                        segments.push(Segment::Text(std::mem::take(&mut text)));
                    }
                    let slot = body[i + 1..close].to_string();
                    placeholders.insert(slot.clone());
                    segments.push(Segment::Slot(slot));
                    i = close + 1;
                    start = i;
                }
                b'}' => return Err(stray('}', i)),
                _ => i += 1,
            }
        }
        text.push_str(&body[start..]);
        if !text.is_empty() {
            segments.push(Segment::Text(text));
        }
        Ok(PromptTemplate {
            name,
            body,
            segments,
            placeholders,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The template source, escapes included.
    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn required_placeholders(&self) -> &BTreeSet<String> {
        &self.placeholders
    }

    /// Substitutes every placeholder. Bindings must cover the placeholder
    /// set exactly.
    pub fn render(&self, bindings: &Bindings) -> Result<String, TemplateError> {
        if let Some(name) = bindings.0.keys().find(|k| !self.placeholders.contains(*k)) {
            return Err(TemplateError::UnknownBinding {
                template: self.name.clone(),
                name: name.clone(),
            });
        }
        let mut out = String::with_capacity(self.body.len());
        for seg in &self.segments {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Slot(s) => match bindings.0.get(s) {
                    Some(v) => out.push_str(v),
                    None => {
                        return Err(TemplateError::MissingBinding {
                            template: self.name.clone(),
                            placeholder: s.clone(),
                        })
                    }
                },
            }
        }
        Ok(out)
    }
}

/// Placeholder values for one render call.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bindings(BTreeMap<String, String>);

/// Text used for inputs that are not available.
pub const ABSENT: &str = "None";

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn text(mut self, name: &str, value: impl Into<String>) -> Self {
        self.0.insert(name.to_string(), value.into());
        self
    }

    /// Structured input rendered as pretty JSON; `None` renders as `None`.
    pub fn json<T: Serialize>(self, name: &str, value: Option<&T>) -> Self {
        let rendered = match value.map(serde_json::to_value) {
            Some(Ok(serde_json::Value::Null)) | None => ABSENT.to_string(),
            Some(Ok(serde_json::Value::String(s))) => s,
            Some(Ok(v)) => serde_json::to_string_pretty(&v).expect("json values serialize"),
            Some(Err(e)) => format!("<unserializable: {e}>"),
        };
        self.text(name, rendered)
    }

    /// Optional text input; absent renders as `None`.
    pub fn opt_text(self, name: &str, value: Option<&str>) -> Self {
        self.text(name, value.unwrap_or(ABSENT))
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.0.get(name).map(String::as_str)
    }
}

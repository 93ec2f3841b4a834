use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no JSON object found in response ({} bytes)", raw.len())]
pub struct ExtractError {
    /// The full response, kept for artifact logging.
    pub raw: String,
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

/// Interior of the first fenced block: the lines strictly between the first
/// two fence lines. An opening fence with no closing fence yields everything
/// after it. `None` when the text has no fence line.
pub fn first_fenced_block(text: &str) -> Option<String> {
    let lines: Vec<&str> = text.split('\n').collect();
    let open = lines.iter().position(|l| is_fence(l))?;
    let close = lines[open + 1..]
        .iter()
        .position(|l| is_fence(l))
        .map(|p| open + 1 + p)
        .unwrap_or(lines.len());
    Some(lines[open + 1..close].join("\n"))
}

fn parse_object(s: &str) -> Option<Value> {
    match serde_json::from_str::<Value>(s.trim()) {
        Ok(v @ Value::Object(_)) => Some(v),
        _ => None,
    }
}

/// End index (exclusive) of the balanced object starting at `start`, with
/// braces inside string literals ignored.
fn balanced_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Finds the JSON object in a model response.
///
/// Strategies, in order: the whole text; the interior of the first fenced
/// block; the first balanced `{...}` span that parses. Later strategies run
/// only when earlier ones fail.
pub fn extract_json(text: &str) -> Result<Value, ExtractError> {
    if let Some(v) = parse_object(text) {
        return Ok(v);
    }
    if let Some(v) = first_fenced_block(text).and_then(|inner| parse_object(&inner)) {
        return Ok(v);
    }
    let bytes = text.as_bytes();
    for (start, _) in text.match_indices('{') {
        if let Some(end) = balanced_end(bytes, start) {
            if let Some(v) = parse_object(&text[start..end]) {
                return Ok(v);
            }
        }
    }
    Err(ExtractError { raw: text.to_string() })
}

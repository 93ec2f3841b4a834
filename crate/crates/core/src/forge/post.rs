use crate::agent::json::first_fenced_block;
use crate::artifacts::CodeSnippet;

/// Interior of the first fenced block, or the text unchanged when it has no
/// fence (the whole response is then taken to be code).
pub fn strip_markdown_fences(text: &str) -> String {
    first_fenced_block(text).unwrap_or_else(|| text.to_string())
}

/// Applies each snippet in order, replacing every occurrence of `before`
/// with `after`. Snippets with an empty side or an absent `before` are skipped.
pub fn apply_feedback_snippets(code: &str, snippets: &[CodeSnippet]) -> String {
    let mut out = code.to_string();
    for s in snippets {
        if !s.before.is_empty() && !s.after.is_empty() && out.contains(&s.before) {
            out = out.replace(&s.before, &s.after);
        }
    }
    out
}

const DELIMITERS: [&str; 2] = ["\"\"\"", "'''"];

/// Appends a closing delimiter for each triple-quote style that occurs an
/// odd number of times. Balanced text is returned unchanged.
pub fn fix_unclosed_docstrings(code: &str) -> String {
    let mut out = code.to_string();
    for d in DELIMITERS {
        if code.matches(d).count() % 2 == 1 {
            if !out.ends_with('\n') {
                out.push('\n');
            }
            out.push_str(d);
            out.push('\n');
        }
    }
    out
}

/// The deterministic steps applied to a raw generation response.
pub fn postprocess(response: &str, snippets: &[CodeSnippet]) -> String {
    fix_unclosed_docstrings(&apply_feedback_snippets(&strip_markdown_fences(response), snippets))
}

use similar::TextDiff;

pub const CONTEXT_LINES: usize = 3;
pub const DEFAULT_CODE_SUFFIX: &str = "py";

/// File name of the program generated at `iteration`.
pub fn code_file_name(iteration: usize, suffix: &str) -> String {
    format!("simulation_code_iter_{iteration}.{suffix}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeDiff {
    pub from_label: String,
    pub to_label: String,
    /// Unified diff text; empty when the programs are identical.
    pub text: String,
}

impl CodeDiff {
    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }
}

/// Unified diff between the programs of `iteration - 1` and `iteration`.
pub fn unified_diff(prev_code: &str, curr_code: &str, iteration: usize, suffix: &str) -> CodeDiff {
    let from_label = code_file_name(iteration.saturating_sub(1), suffix);
    let to_label = code_file_name(iteration, suffix);
    let text = if prev_code == curr_code {
        String::new()
    } else {
        TextDiff::from_lines(prev_code, curr_code)
            .unified_diff()
            .context_radius(CONTEXT_LINES)
            .header(&from_label, &to_label)
            .to_string()
    };
    CodeDiff {
        from_label,
        to_label,
        text,
    }
}

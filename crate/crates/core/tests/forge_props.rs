use proptest::prelude::*;
use simforge_core::artifacts::CodeSnippet;
use simforge_core::forge::{apply_feedback_snippets, fix_unclosed_docstrings, strip_markdown_fences};

fn snippet(before: &str, after: &str) -> CodeSnippet {
    serde_json::from_value(serde_json::json!({"before": before, "after": after})).unwrap()
}

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec(prop_oneof!["a", "b", "ab", "\n", "```", "```py\n", "\"\"\"", "'''", " "], 0..40)
        .prop_map(|parts| parts.concat())
}

proptest! {
    #[test]
    fn strip_is_idempotent(t in text()) {
        let once = strip_markdown_fences(&t);
        prop_assert_eq!(strip_markdown_fences(&once), once);
    }

    #[test]
    fn snippet_length_identity(code in "[ab]{0,30}", before in "[ab]{1,3}", after in "[abc]{1,4}") {
        let occurrences = code.matches(before.as_str()).count() as i64;
        let out = apply_feedback_snippets(&code, &[snippet(&before, &after)]);
        let delta = out.len() as i64 - code.len() as i64;
        prop_assert_eq!(delta, occurrences * (after.len() as i64 - before.len() as i64));
    }

    #[test]
    fn docstring_repair_balances(t in text()) {
        let out = fix_unclosed_docstrings(&t);
        prop_assert!(out.starts_with(&t));
        if t.matches("\"\"\"").count() % 2 == 0 && t.matches("'''").count() % 2 == 0 {
            prop_assert_eq!(&out, &t);
        }
        prop_assert_eq!(out.matches("\"\"\"").count() % 2, 0);
        prop_assert_eq!(out.matches("'''").count() % 2, 0);
        prop_assert_eq!(fix_unclosed_docstrings(&out), out);
    }
}

use std::sync::OnceLock;

use super::template::PromptTemplate;

/// Every prompt asset shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PromptId {
    TaskUnderstanding,
    DataAnalysis,
    ModelPlanning,
    CodeGeneration,
    CodeVerification,
    SimulationExecution,
    ResultEvaluation,
    FeedbackGeneration,
    IterationControl,
    FixCheck,
    QualityCheck,
    FeedbackCheck,
    HistoricalCheck,
    ImproveCode,
    FixSyntax,
    SemanticSummary,
    IntegrityCheck,
}

impl PromptId {
    pub const ALL: [PromptId; 17] = [
        PromptId::TaskUnderstanding,
        PromptId::DataAnalysis,
        PromptId::ModelPlanning,
        PromptId::CodeGeneration,
        PromptId::CodeVerification,
        PromptId::SimulationExecution,
        PromptId::ResultEvaluation,
        PromptId::FeedbackGeneration,
        PromptId::IterationControl,
        PromptId::FixCheck,
        PromptId::QualityCheck,
        PromptId::FeedbackCheck,
        PromptId::HistoricalCheck,
        PromptId::ImproveCode,
        PromptId::FixSyntax,
        PromptId::SemanticSummary,
        PromptId::IntegrityCheck,
    ];

    pub fn file_name(self) -> &'static str {
        self.source().0
    }

    fn source(self) -> (&'static str, &'static str) {
        macro_rules! asset {
            ($f:literal) => {
                ($f, include_str!(concat!("../../prompts/", $f)))
            };
        }
        match self {
            PromptId::TaskUnderstanding => asset!("task_understanding.txt"),
            PromptId::DataAnalysis => asset!("data_analysis.txt"),
            PromptId::ModelPlanning => asset!("model_planning.txt"),
            PromptId::CodeGeneration => asset!("code_generation.txt"),
            PromptId::CodeVerification => asset!("code_verification.txt"),
            PromptId::SimulationExecution => asset!("simulation_execution.txt"),
            PromptId::ResultEvaluation => asset!("result_evaluation.txt"),
            PromptId::FeedbackGeneration => asset!("feedback_generation.txt"),
            PromptId::IterationControl => asset!("iteration_control.txt"),
            PromptId::FixCheck => asset!("fix_check.txt"),
            PromptId::QualityCheck => asset!("quality_check.txt"),
            PromptId::FeedbackCheck => asset!("feedback_check.txt"),
            PromptId::HistoricalCheck => asset!("historical_check.txt"),
            PromptId::ImproveCode => asset!("improve_code.txt"),
            PromptId::FixSyntax => asset!("fix_syntax.txt"),
            PromptId::SemanticSummary => asset!("semantic_summary.txt"),
            PromptId::IntegrityCheck => asset!("integrity_check.txt"),
        }
    }

    /// Raw asset text as shipped.
    pub fn asset(self) -> &'static str {
        self.source().1
    }

    pub fn template(self) -> &'static PromptTemplate {
        static PARSED: OnceLock<Vec<PromptTemplate>> = OnceLock::new();
        let all = PARSED.get_or_init(|| {
            PromptId::ALL
                .iter()
                .map(|id| {
                    let (name, body) = id.source();
                    PromptTemplate::parse(name, body).unwrap_or_else(|e| panic!("bundled prompt is malformed: {e}"))
                })
                .collect()
        });
        let pos = PromptId::ALL.iter().position(|p| *p == self).expect("listed in ALL");
        &all[pos]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::template::Bindings;

    fn placeholders(id: PromptId) -> Vec<&'static str> {
        id.template().required_placeholders().iter().map(String::as_str).collect()
    }

    #[test]
    fn every_asset_parses() {
        for id in PromptId::ALL {
            assert!(!id.template().required_placeholders().is_empty(), "{id:?}");
        }
    }

    #[test]
    fn placeholder_sets() {
        assert_eq!(placeholders(PromptId::TaskUnderstanding), ["task_description"]);
        assert_eq!(placeholders(PromptId::DataAnalysis), ["analysis_results", "task_spec"]);
        assert_eq!(placeholders(PromptId::ModelPlanning), ["data_analysis", "task_spec"]);
        assert_eq!(
            placeholders(PromptId::CodeGeneration),
            ["data_analysis", "feedback", "model_plan", "previous_code", "task_spec"]
        );
        assert_eq!(placeholders(PromptId::CodeVerification), ["code", "task_spec"]);
        assert_eq!(placeholders(PromptId::SimulationExecution), ["code_path", "data_path", "task_spec"]);
        assert_eq!(
            placeholders(PromptId::ResultEvaluation),
            ["data_analysis", "simulation_results", "task_spec"]
        );
        assert_eq!(
            placeholders(PromptId::FeedbackGeneration),
            [
                "code_content",
                "code_diff",
                "evaluation_results",
                "simulation_results",
                "task_spec",
                "verification_results"
            ]
        );
        assert_eq!(
            placeholders(PromptId::IterationControl),
            [
                "current_iteration",
                "evaluation_results",
                "feedback",
                "max_iterations",
                "verification_results"
            ]
        );
        assert_eq!(placeholders(PromptId::FixCheck), ["code_content", "historical_issues"]);
    }

    /// Rendering each placeholder as its own marker gives back the asset
    /// with escapes collapsed, so nothing outside the placeholder sites moves.
    #[test]
    fn rendering_only_touches_placeholder_sites() {
        for id in PromptId::ALL {
            let t = id.template();
            let b = t
                .required_placeholders()
                .iter()
                .fold(Bindings::new(), |b, p| b.text(p, format!("{{{p}}}")));
            let rendered = t.render(&b).unwrap();
            let expected = id.asset().replace("{{", "{").replace("}}", "}");
            assert_eq!(rendered, expected, "{id:?}");
        }
    }

    #[test]
    fn empty_diff_keeps_json_skeleton() {
        let t = PromptId::FeedbackGeneration.template();
        let b = t.required_placeholders().iter().fold(Bindings::new(), |b, p| b.text(p, "X"));
        let with_x = t.render(&b).unwrap();
        let with_empty = t.render(&b.clone().text("code_diff", "")).unwrap();
        assert_eq!(with_x.len() - with_empty.len(), 1);
        assert!(with_empty.contains("Code Changes From Previous Iteration:\n\n"));
        let open = with_empty.matches('{').count();
        let close = with_empty.matches('}').count();
        assert_eq!(open, close);
        assert!(with_empty.contains("\"code_snippets\": ["));
    }

    #[test]
    fn fix_check_emits_single_braces() {
        let t = PromptId::FixCheck.template();
        let out = t
            .render(&Bindings::new().text("historical_issues", "H").text("code_content", "C"))
            .unwrap();
        assert!(out.contains("START WITH { AND END WITH }"));
        assert!(out.contains("{ \"iteration_0\": [ { \"issue\""));
        assert!(!out.contains("{{"));
    }
}

//! Evaluation metrics over annotated test runs.
//!
//! Annotators decide what is incorrect, missing, executed or a true bug;
//! this module only counts. Inputs arrive as JSON lines (see
//! [`AnnotationSet`]) and come out as [`SuiteMetrics`] tables.
//!
//! Percentages print with one decimal, ratios such as precision with two,
//! undefined values as `-` and unannotated ones as `?`.

mod bugs;
mod hallucination;
mod report;
mod scoring;
mod steps;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::RunRecord;

pub use bugs::{bug_confusion, BugConfusion, BugLabel, LabelKind, TestPrompt};
pub use hallucination::{hallucination_report, validate_tags, HallucinationCategory, HallucinationReport, HallucinationTag};
pub use report::{build_suite_metrics, cost_rows, render_text, AgentMetrics, CostRow, SuiteMetrics};
pub use scoring::{score_execution, score_planning, ExecutionScore, PhaseExecution, PhasePlanning, StepAnnotation};
pub use steps::{
    discretize, discretize_all, plan_from_record, DiscretizedStep, ElementKind, PlanDocument, PlanElement, StepKind,
    StepPhase,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("element `{element}` of `{test}` has no kind; classify it before counting")]
    ClassificationRequired { test: String, element: String },
    #[error("element `{element}` of `{test}`: {reason}")]
    MalformedElement { test: String, element: String, reason: String },
    #[error("step `{step}` has no annotation")]
    IncompleteAnnotation { step: String },
    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("{0}")]
    Io(String),
}

pub const UNANNOTATED: &str = "?";

/// `49.5%`, or `-` when undefined.
pub fn fmt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |p| format!("{p:.1}%"))
}

/// `0.92`, or `-` when undefined.
pub fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |m| format!("{m:.2}"))
}

/// `96.0% (1551/1615)`, or `--` for an empty phase.
pub fn fmt_ratio(p: &PhaseExecution) -> String {
    match p.ratio() {
        Some(r) => format!("{:.1}% ({}/{})", 100.0 * r, p.ok, p.total),
        None => "--".into(),
    }
}

/// One line of an annotation file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnnotationRecord {
    Plan(PlanDocument),
    Step(StepAnnotation),
    Test(TestPrompt),
    Bug(BugLabel),
    Hallucination(HallucinationTag),
}

/// Everything annotated for one tester system.
///
/// Missing-step entries are attributed to a test by the part of their id
/// before the first `:`, matching discretized step ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub plans: Vec<PlanDocument>,
    pub steps: Vec<StepAnnotation>,
    pub tests: Vec<TestPrompt>,
    pub bugs: Vec<BugLabel>,
    pub hallucinations: Vec<HallucinationTag>,
}

impl AnnotationSet {
    pub fn push(&mut self, r: AnnotationRecord) {
        match r {
            AnnotationRecord::Plan(p) => self.plans.push(p),
            AnnotationRecord::Step(s) => self.steps.push(s),
            AnnotationRecord::Test(t) => self.tests.push(t),
            AnnotationRecord::Bug(b) => self.bugs.push(b),
            AnnotationRecord::Hallucination(h) => self.hallucinations.push(h),
        }
    }

    pub fn parse_jsonl(text: &str) -> Result<Self, MetricsError> {
        let mut set = AnnotationSet::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let r: AnnotationRecord =
                serde_json::from_str(line).map_err(|e| MetricsError::Parse { line: i + 1, reason: e.to_string() })?;
            set.push(r);
        }
        validate_tags(&set.hallucinations)?;
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self, MetricsError> {
        let text = std::fs::read_to_string(path).map_err(|e| MetricsError::Io(format!("{}: {e}", path.display())))?;
        Self::parse_jsonl(&text)
    }

    /// Adds the machine-observable part of each run: its step plan and
    /// whether the prompt was delivered. Tests that already have a plan or a
    /// prompt record keep theirs.
    pub fn add_records(&mut self, records: &[RunRecord]) {
        for r in records {
            let id = &r.feature.id;
            if !self.plans.iter().any(|p| &p.test == id) {
                self.plans.push(plan_from_record(r));
            }
            if !self.tests.iter().any(|t| &t.test == id) {
                self.tests.push(TestPrompt {
                    test: id.clone(),
                    agent: r.agent.name.clone(),
                    prompt_successful: r.evidence.as_ref().is_some_and(|e| e.prompt_delivered),
                    bugs_labeled: false,
                });
            }
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut put = |r: AnnotationRecord| {
            out.push_str(&serde_json::to_string(&r).unwrap_or_default());
            out.push('\n');
        };
        self.plans.iter().cloned().map(AnnotationRecord::Plan).for_each(&mut put);
        self.steps.iter().cloned().map(AnnotationRecord::Step).for_each(&mut put);
        self.tests.iter().cloned().map(AnnotationRecord::Test).for_each(&mut put);
        self.bugs.iter().cloned().map(AnnotationRecord::Bug).for_each(&mut put);
        self.hallucinations.iter().cloned().map(AnnotationRecord::Hallucination).for_each(&mut put);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting() {
        assert_eq!(fmt_pct(Some(100.0 * 49.0 / 99.0)), "49.5%");
        assert_eq!(fmt_pct(None), "-");
        assert_eq!(fmt_metric(Some(13.0 / 71.0)), "0.18");
        assert_eq!(fmt_ratio(&PhaseExecution { ok: 1551, total: 1615 }), "96.0% (1551/1615)");
        assert_eq!(fmt_ratio(&PhaseExecution { ok: 510, total: 510 }), "100.0% (510/510)");
    }

    #[test]
    fn jsonl_round_trip() {
        let text = r#"
# comment
{"kind":"plan","test":"t1","agent":"A","elements":[{"id":"e1","phase":"setup","kind":{"type":"email","attachments":["x"]}}]}
{"kind":"step","step":"t1:e1#1","executed_ok":false}
{"kind":"step","step":"t1:gap","phase":"validation","missing":true}
{"kind":"test","test":"t1","agent":"A","prompt_successful":true}
{"kind":"bug","report":"b1","test":"t1","agent":"A","label":"TP"}
{"kind":"hallucination","category":"ui","failure":"f1","system":"S"}
"#;
        let set = AnnotationSet::parse_jsonl(text).unwrap();
        assert_eq!((set.plans.len(), set.steps.len(), set.tests.len(), set.bugs.len()), (1, 2, 1, 1));
        assert!(set.steps[0].planned_correct);
        assert!(!set.steps[0].executed_ok);
        assert_eq!(AnnotationSet::parse_jsonl(&set.to_jsonl()).unwrap(), set);
    }

    #[test]
    fn parse_error_names_line() {
        let e = AnnotationSet::parse_jsonl("\n{\"kind\":\"nope\"}").unwrap_err();
        assert!(matches!(e, MetricsError::Parse { line: 2, .. }));
    }
}

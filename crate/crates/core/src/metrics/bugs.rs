//! Bug-detection confusion counts and prompting success rate.

use serde::{Deserialize, Serialize};

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelKind {
    TP,
    FP,
    FN,
}

/// Ground-truth label for one reported (TP, FP) or missed (FN) bug.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugLabel {
    pub report: String,
    #[serde(default)]
    pub test: String,
    #[serde(default)]
    pub agent: String,
    pub label: LabelKind,
    #[serde(default)]
    pub env_setup_caused: bool,
    #[serde(default = "yes")]
    pub prompt_successful: bool,
}

fn is_true(b: &bool) -> bool {
    *b
}

/// Whether the intended prompt reached the subject agent in one test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestPrompt {
    pub test: String,
    #[serde(default)]
    pub agent: String,
    pub prompt_successful: bool,
    /// Whether an annotator reviewed this test's bug reports. Tests taken
    /// straight from run records are not.
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub bugs_labeled: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugConfusion {
    pub tp: usize,
    /// False positives from tests whose prompt was delivered.
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Reports from tests whose prompt never arrived: always false
    /// positives, kept out of `fp`.
    pub excluded_fps: usize,
    pub tests: usize,
    pub successful_prompts: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl BugConfusion {
    pub fn total_fp(&self) -> usize {
        self.fp + self.excluded_fps
    }

    /// Bugs the subject agents actually exhibited: TP + FN.
    pub fn bugs_triggered(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn psr(&self) -> Option<f64> {
        (self.tests > 0).then(|| 100.0 * self.successful_prompts as f64 / self.tests as f64)
    }

    /// TP over every report, excluded ones included.
    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.total_fp();
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn f1(&self) -> Option<f64> {
        let (p, r) = (self.precision()?, self.recall()?);
        (p + r > 0.0).then(|| 2.0 * p * r / (p + r))
    }
}

/// Tallies `labels` against the per-test prompt flags in `tests`.
///
/// Setup-caused reports count as false positives whatever their label, and
/// reports from tests with an undelivered prompt land in `excluded_fps`.
/// Either relabeling adds a warning.
pub fn bug_confusion(labels: &[BugLabel], tests: &[TestPrompt]) -> BugConfusion {
    let mut c = BugConfusion {
        tests: tests.len(),
        successful_prompts: tests.iter().filter(|t| t.prompt_successful).count(),
        ..BugConfusion::default()
    };
    for l in labels {
        let mut kind = l.label;
        if l.env_setup_caused && kind != LabelKind::FP {
            c.warnings.push(format!("`{}` was caused by environment setup; counted as FP", l.report));
            kind = LabelKind::FP;
        }
        match kind {
            LabelKind::FN => c.fn_ += 1,
            _ if !l.prompt_successful => {
                if kind == LabelKind::TP {
                    c.warnings.push(format!("`{}` comes from an undelivered prompt; counted as excluded FP", l.report));
                }
                c.excluded_fps += 1;
            }
            LabelKind::TP => c.tp += 1,
            LabelKind::FP => c.fp += 1,
        }
    }
    c
}

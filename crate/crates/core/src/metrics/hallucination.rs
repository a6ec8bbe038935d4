//! Counting tagged tester failures by hallucination type.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HallucinationCategory {
    /// Acting against the test objective, e.g. fixing the agent's bug.
    InputConflicting,
    /// Non-existent UI elements or identifiers.
    Ui,
    /// Non-existent or irrelevant tools or parameters.
    ApiTool,
    /// Plausible steps that fail when executed.
    Algorithmic,
    /// Brittle, insufficient or unjustified assertions.
    FalseValidation,
    Miscellaneous,
}

impl HallucinationCategory {
    pub const ALL: [HallucinationCategory; 6] = [
        HallucinationCategory::InputConflicting,
        HallucinationCategory::Ui,
        HallucinationCategory::ApiTool,
        HallucinationCategory::Algorithmic,
        HallucinationCategory::FalseValidation,
        HallucinationCategory::Miscellaneous,
    ];

    pub fn label(self) -> &'static str {
        match self {
            HallucinationCategory::InputConflicting => "Input-conflicting",
            HallucinationCategory::Ui => "UI",
            HallucinationCategory::ApiTool => "API/Tool",
            HallucinationCategory::Algorithmic => "Algorithmic",
            HallucinationCategory::FalseValidation => "False validation",
            HallucinationCategory::Miscellaneous => "Miscellaneous",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HallucinationTag {
    pub category: HallucinationCategory,
    pub failure: String,
    #[serde(default)]
    pub system: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HallucinationReport {
    pub by_category: BTreeMap<HallucinationCategory, usize>,
    pub by_system: BTreeMap<String, BTreeMap<HallucinationCategory, usize>>,
    pub total: usize,
}

impl HallucinationReport {
    pub fn system_total(&self, system: &str) -> usize {
        self.by_system.get(system).map_or(0, |m| m.values().sum())
    }
}

fn zeroed() -> BTreeMap<HallucinationCategory, usize> {
    HallucinationCategory::ALL.iter().map(|c| (*c, 0)).collect()
}

/// Each failure may carry only one tag per system.
pub fn validate_tags(tags: &[HallucinationTag]) -> Result<(), MetricsError> {
    let mut seen = std::collections::BTreeSet::new();
    for t in tags {
        if !seen.insert((t.system.as_str(), t.failure.as_str())) {
            return Err(MetricsError::InvalidAnnotation(format!(
                "failure `{}` of `{}` tagged more than once",
                t.failure, t.system
            )));
        }
    }
    Ok(())
}

pub fn hallucination_report(tags: &[HallucinationTag]) -> HallucinationReport {
    let mut r = HallucinationReport { by_category: zeroed(), ..Default::default() };
    for t in tags {
        *r.by_category.entry(t.category).or_default() += 1;
        *r.by_system.entry(t.system.clone()).or_insert_with(zeroed).entry(t.category).or_default() += 1;
        r.total += 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag(c: HallucinationCategory, f: &str, s: &str) -> HallucinationTag {
        HallucinationTag { category: c, failure: f.into(), system: s.into() }
    }

    #[test]
    fn empty_is_zero() {
        let r = hallucination_report(&[]);
        assert_eq!(r.total, 0);
        assert_eq!(r.by_category.len(), 6);
        assert!(r.by_category.values().all(|v| *v == 0));
    }

    #[test]
    fn counts_by_system() {
        let t = vec![
            tag(HallucinationCategory::Ui, "f1", "a"),
            tag(HallucinationCategory::Ui, "f2", "b"),
            tag(HallucinationCategory::ApiTool, "f3", "a"),
        ];
        let r = hallucination_report(&t);
        assert_eq!(r.total, 3);
        assert_eq!(r.by_category[&HallucinationCategory::Ui], 2);
        assert_eq!(r.system_total("a"), 2);
        assert_eq!(r.by_system["b"][&HallucinationCategory::Ui], 1);
    }

    #[test]
    fn double_tag_rejected() {
        let t = vec![tag(HallucinationCategory::Ui, "f1", "a"), tag(HallucinationCategory::Algorithmic, "f1", "a")];
        assert!(validate_tags(&t).is_err());
        assert!(validate_tags(&t[..1]).is_ok());
    }
}

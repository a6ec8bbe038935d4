//! Breaking generated tests into countable steps.
//!
//! | element                     | steps                              |
//! |-----------------------------|------------------------------------|
//! | navigation                  | one per UI state transition        |
//! | data extraction             | one per listed item                |
//! | email                       | 4, plus 1 per attachment           |
//! | file with content           | 2 (create, populate)               |
//! | touch / mkdir               | 1                                  |
//! | terminal command            | one per segment of `&& \|\| ; \| &` |
//! | natural language            | one per statement                  |

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::env::shell::split_chain;
use crate::pipeline::RunRecord;
use crate::role::SpecialistRole;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepPhase {
    Setup,
    Execution,
    Validation,
    Cleanup,
}

impl StepPhase {
    pub const ALL: [StepPhase; 4] = [StepPhase::Setup, StepPhase::Execution, StepPhase::Validation, StepPhase::Cleanup];

    pub fn label(self) -> &'static str {
        match self {
            StepPhase::Setup => "Setup",
            StepPhase::Execution => "Execution",
            StepPhase::Validation => "Validation",
            StepPhase::Cleanup => "Cleanup",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Navigation,
    DataExtraction,
    EmailCreation,
    AttachmentAdd,
    FileCreateWithContent,
    FileTouchOrMkdir,
    TerminalCommand,
    NaturalLanguage,
}

/// What a plan element is. Annotators fill this in; the discretizer never
/// guesses it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ElementKind {
    Navigation { transitions: Vec<String> },
    DataExtraction { items: Vec<String> },
    Email {
        #[serde(default)]
        attachments: Vec<String>,
    },
    FileWithContent { path: String },
    Touch { path: String },
    Mkdir { path: String },
    Terminal { command: String },
    NaturalLanguage { statements: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanElement {
    pub id: String,
    pub phase: StepPhase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ElementKind>,
}

/// The plan of one generated test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub test: String,
    #[serde(default)]
    pub agent: String,
    pub elements: Vec<PlanElement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscretizedStep {
    /// `<test>:<element>#<n>`, n counting from 1 within the element.
    pub id: String,
    pub phase: StepPhase,
    pub kind: StepKind,
    pub source_ref: String,
}

pub fn discretize(plan: &PlanDocument) -> Result<Vec<DiscretizedStep>, MetricsError> {
    let mut out = Vec::new();
    for el in &plan.elements {
        let kind = el.kind.as_ref().ok_or_else(|| MetricsError::ClassificationRequired {
            test: plan.test.clone(),
            element: el.id.clone(),
        })?;
        let kinds = element_steps(kind).map_err(|reason| MetricsError::MalformedElement {
            test: plan.test.clone(),
            element: el.id.clone(),
            reason,
        })?;
        for (n, k) in kinds.into_iter().enumerate() {
            out.push(DiscretizedStep {
                id: format!("{}:{}#{}", plan.test, el.id, n + 1),
                phase: el.phase,
                kind: k,
                source_ref: el.id.clone(),
            });
        }
    }
    Ok(out)
}

fn element_steps(kind: &ElementKind) -> Result<Vec<StepKind>, String> {
    use StepKind as S;
    Ok(match kind {
        ElementKind::Navigation { transitions } => vec![S::Navigation; transitions.len()],
        ElementKind::DataExtraction { items } => vec![S::DataExtraction; items.len()],
        ElementKind::Email { attachments } => {
            let mut v = vec![S::EmailCreation; 4];
            v.extend(std::iter::repeat_n(S::AttachmentAdd, attachments.len()));
            v
        }
        ElementKind::FileWithContent { .. } => vec![S::FileCreateWithContent; 2],
        ElementKind::Touch { .. } | ElementKind::Mkdir { .. } => vec![S::FileTouchOrMkdir],
        ElementKind::Terminal { command } => {
            let segments = split_chain(command).map_err(|e| e.to_string())?;
            if segments.is_empty() {
                return Err("empty command".into());
            }
            vec![S::TerminalCommand; segments.len()]
        }
        ElementKind::NaturalLanguage { statements } => vec![S::NaturalLanguage; statements.len()],
    })
}

/// Discretizes every plan, failing on the first unclassified element.
pub fn discretize_all(plans: &[PlanDocument]) -> Result<Vec<DiscretizedStep>, MetricsError> {
    let mut out = Vec::new();
    for p in plans {
        out.extend(discretize(p)?);
    }
    Ok(out)
}

/// The plan a run actually carried out, read from its tool log.
///
/// Setup calls become email, terminal or extraction elements; each Engineer
/// UI action except `read_screen` is one navigation transition; Investigator
/// probes are extraction items and Judge questions natural-language
/// statements.
pub fn plan_from_record(rec: &RunRecord) -> PlanDocument {
    let mut elements = Vec::new();
    let mut nav = Vec::new();
    let mut items = Vec::new();
    for (i, entry) in rec.tool_log.iter().enumerate() {
        let c = &entry.call;
        let arg = |k: &str| c.args.get(k).and_then(|v| v.as_str()).unwrap_or_default().to_string();
        match (entry.role, c.tool.as_str()) {
            (SpecialistRole::InfrastructureManager, "send_email") => {
                let attachments = c
                    .args
                    .get("attachments")
                    .and_then(|v| v.as_array())
                    .map(|a| {
                        a.iter()
                            .enumerate()
                            .map(|(j, v)| v.get("name").and_then(|n| n.as_str()).map_or(j.to_string(), str::to_string))
                            .collect()
                    })
                    .unwrap_or_default();
                elements.push(PlanElement {
                    id: format!("setup-{i}"),
                    phase: StepPhase::Setup,
                    kind: Some(ElementKind::Email { attachments }),
                });
            }
            (SpecialistRole::InfrastructureManager, "exec_command") => elements.push(PlanElement {
                id: format!("setup-{i}"),
                phase: StepPhase::Setup,
                kind: Some(ElementKind::Terminal { command: arg("cmdline") }),
            }),
            (SpecialistRole::InfrastructureManager, "probe") => elements.push(PlanElement {
                id: format!("setup-{i}"),
                phase: StepPhase::Setup,
                kind: Some(ElementKind::DataExtraction { items: vec![format!("{}:{}", arg("domain"), arg("selector"))] }),
            }),
            (SpecialistRole::Engineer, "read_screen") => {}
            (SpecialistRole::Engineer, tool) => nav.push(tool.to_string()),
            (SpecialistRole::Investigator, "probe") => items.push(format!("{}:{}", arg("domain"), arg("selector"))),
            (SpecialistRole::Investigator, tool) => items.push(tool.to_string()),
            _ => {}
        }
    }
    if !nav.is_empty() {
        elements.push(PlanElement {
            id: "execution".into(),
            phase: StepPhase::Execution,
            kind: Some(ElementKind::Navigation { transitions: nav }),
        });
    }
    if !items.is_empty() {
        elements.push(PlanElement {
            id: "investigation".into(),
            phase: StepPhase::Validation,
            kind: Some(ElementKind::DataExtraction { items }),
        });
    }
    if let Some(m) = rec.meta_cot.as_ref().filter(|m| !m.questions.is_empty()) {
        elements.push(PlanElement {
            id: "judgement".into(),
            phase: StepPhase::Validation,
            kind: Some(ElementKind::NaturalLanguage { statements: m.questions.iter().map(|q| q.text.clone()).collect() }),
        });
    }
    PlanDocument { test: rec.feature.id.clone(), agent: rec.agent.name.clone(), elements }
}

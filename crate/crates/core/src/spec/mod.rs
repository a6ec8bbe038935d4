//! The bundled test specification and its controlled evolution.
//!
//! A [`TestSpecification`] pairs environment setup, the prompt delivered to
//! the subject agent, and the oracles the Judge checks. It is revised as
//! phases discover constraints, but never edited in place: every accepted
//! revision appends a full snapshot, and earlier snapshots stay untouched.
//!
//! Cross references are explicit. Setup steps declare the entity keys they
//! provide, the prompt declares the keys it requires and introduces, and
//! oracles declare the keys they reference. [`coherence_check`] works on
//! those keys only; it never interprets prompt text.

mod coherence;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::env::ProbeQuery;
use crate::role::SpecialistRole;

pub use coherence::{coherence_check, CoherenceViolation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("invalid feature: {0}")]
    InvalidFeature(String),
    #[error("role {0} may not revise the test specification")]
    RoleViolation(SpecialistRole),
    #[error("revision would leave oracle references dangling: {0:?}")]
    IncoherentRevision(Vec<CoherenceViolation>),
    #[error("revision description must not be empty")]
    EmptyDescription,
    #[error("invalid oracle {id}: {reason}")]
    InvalidOracle { id: String, reason: String },
    #[error("revision targets unknown {kind} `{id}`")]
    UnknownTarget { kind: &'static str, id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureDomain {
    Email,
    FileSystem,
    HrQa,
    Other,
}

/// A natural-language feature statement the subject agent should support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescription {
    pub id: String,
    pub domain: FeatureDomain,
    pub text: String,
}

impl FeatureDescription {
    pub fn new(id: impl Into<String>, domain: FeatureDomain, text: impl Into<String>) -> Self {
        Self { id: id.into(), domain, text: text.into() }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.id.trim().is_empty() {
            return Err(SpecError::InvalidFeature("feature id is empty".into()));
        }
        if self.text.trim().is_empty() {
            return Err(SpecError::InvalidFeature(format!("feature `{}` has no text", self.id)));
        }
        Ok(())
    }
}

/// Checks feature ids are unique within a suite.
pub fn validate_feature_list(features: &[FeatureDescription]) -> Result<(), SpecError> {
    let mut seen = std::collections::BTreeSet::new();
    for f in features {
        f.validate()?;
        if !seen.insert(f.id.as_str()) {
            return Err(SpecError::InvalidFeature(format!("duplicate feature id `{}`", f.id)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Platform {
    Cli,
    WebApp,
    BrowserExtension,
    Desktop,
}

/// How to reach the subject agent. The platform decides which launch tools
/// the Engineer gets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpecification {
    pub name: String,
    pub platform: Platform,
    /// Ordered launch instructions: a command for CLI agents, a navigation
    /// target for web agents.
    pub launch: Vec<String>,
    #[serde(default)]
    pub docs: String,
}

impl AgentSpecification {
    pub fn validate(&self) -> Result<(), SpecError> {
        if self.launch.iter().all(|l| l.trim().is_empty()) {
            return Err(SpecError::InvalidFeature(format!(
                "agent `{}` has no launch instructions",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetupTarget {
    Email,
    FileSystem,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupStep {
    pub id: String,
    /// Abstract intent, e.g. "one email from David asking for projections".
    pub intent: String,
    pub target: SetupTarget,
    /// Entity keys this step brings into existence.
    #[serde(default)]
    pub provides: Vec<String>,
    /// Environment tool the planner expects to realize the step with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    EnvProbe,
    ScreenEvidence,
    AgentSelfReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Oracle {
    pub id: String,
    pub description: String,
    pub check_kind: CheckKind,
    /// Required for [`CheckKind::EnvProbe`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeQuery>,
    #[serde(default)]
    pub references: Vec<String>,
    /// Valid alternative execution paths the check must accept.
    #[serde(default)]
    pub generalizability_note: String,
}

impl Oracle {
    pub fn validate(&self) -> Result<(), SpecError> {
        if self.id.trim().is_empty() {
            return Err(SpecError::InvalidOracle { id: self.id.clone(), reason: "empty id".into() });
        }
        if self.check_kind == CheckKind::EnvProbe {
            match &self.probe {
                Some(p) if !p.selector.trim().is_empty() => {}
                _ => {
                    return Err(SpecError::InvalidOracle {
                        id: self.id.clone(),
                        reason: "env probe oracle must name a probe target".into(),
                    })
                }
            }
        }
        Ok(())
    }
}

/// One full copy of the test specification content.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpecSnapshot {
    pub setup_steps: Vec<SetupStep>,
    pub subject_prompt: String,
    /// Entity keys the prompt relies on existing in the environment.
    #[serde(default)]
    pub prompt_requires: Vec<String>,
    /// Entity keys the prompt itself brings in (e.g. the reply to be sent).
    #[serde(default)]
    pub prompt_introduces: Vec<String>,
    pub oracles: Vec<Oracle>,
}

impl SpecSnapshot {
    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = canonical_json(self);
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SnapshotId(pub u32);

impl std::fmt::Display for SnapshotId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Revision {
    /// `None` for the initial shell.
    pub author_role: Option<SpecialistRole>,
    /// Logical timestamp.
    pub timestamp: i64,
    pub description: String,
    pub before: Option<SnapshotId>,
    pub after: SnapshotId,
}

/// A single structural edit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum SpecEdit {
    AddSetupStep { step: SetupStep },
    RemoveSetupStep { id: String },
    ReplaceSetupStep { step: SetupStep },
    SetPrompt {
        text: String,
        #[serde(default)]
        requires: Option<Vec<String>>,
        #[serde(default)]
        introduces: Option<Vec<String>>,
    },
    AddOracle { oracle: Oracle },
    RemoveOracle { id: String },
    ReplaceOracle { oracle: Oracle },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RevisionDelta {
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub edits: Vec<SpecEdit>,
}

impl RevisionDelta {
    pub fn new(description: impl Into<String>) -> Self {
        Self { description: description.into(), edits: Vec::new() }
    }

    pub fn edit(mut self, edit: SpecEdit) -> Self {
        self.edits.push(edit);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    /// Replace the whole content with `content`.
    pub fn replace_all(description: impl Into<String>, current: &SpecSnapshot, content: SpecSnapshot) -> Self {
        let mut d = RevisionDelta::new(description);
        for s in &current.setup_steps {
            d.edits.push(SpecEdit::RemoveSetupStep { id: s.id.clone() });
        }
        for o in &current.oracles {
            d.edits.push(SpecEdit::RemoveOracle { id: o.id.clone() });
        }
        for s in content.setup_steps {
            d.edits.push(SpecEdit::AddSetupStep { step: s });
        }
        d.edits.push(SpecEdit::SetPrompt {
            text: content.subject_prompt,
            requires: Some(content.prompt_requires),
            introduces: Some(content.prompt_introduces),
        });
        for o in content.oracles {
            d.edits.push(SpecEdit::AddOracle { oracle: o });
        }
        d
    }
}

/// The bundled, append-only test specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSpecification {
    pub feature_id: String,
    snapshots: Vec<Arc<SpecSnapshot>>,
    revisions: Vec<Revision>,
}

/// Creates the empty shell for `feature`, recording revision 0.
pub fn new_specification(
    feature: &FeatureDescription,
    agent: &AgentSpecification,
) -> Result<TestSpecification, SpecError> {
    feature.validate()?;
    agent.validate()?;
    Ok(TestSpecification {
        feature_id: feature.id.clone(),
        snapshots: vec![Arc::new(SpecSnapshot::default())],
        revisions: vec![Revision {
            author_role: None,
            timestamp: 0,
            description: format!("shell for feature `{}` on agent `{}`", feature.id, agent.name),
            before: None,
            after: SnapshotId(0),
        }],
    })
}

/// Applies `delta` as `role`, with the next logical timestamp.
pub fn revise_specification(
    spec: &TestSpecification,
    role: SpecialistRole,
    delta: &RevisionDelta,
) -> Result<TestSpecification, SpecError> {
    let ts = spec.revisions.last().map_or(0, |r| r.timestamp + 1);
    spec.revise_at(role, delta, ts)
}

impl TestSpecification {
    pub fn active(&self) -> &SpecSnapshot {
        self.snapshots.last().expect("specification always holds a snapshot")
    }

    pub fn active_id(&self) -> SnapshotId {
        SnapshotId((self.snapshots.len() - 1) as u32)
    }

    pub fn snapshot(&self, id: SnapshotId) -> Option<&SpecSnapshot> {
        self.snapshots.get(id.0 as usize).map(|s| s.as_ref())
    }

    pub fn snapshots(&self) -> impl Iterator<Item = (SnapshotId, &SpecSnapshot)> {
        self.snapshots.iter().enumerate().map(|(i, s)| (SnapshotId(i as u32), s.as_ref()))
    }

    pub fn revisions(&self) -> &[Revision] {
        &self.revisions
    }

    pub fn setup_steps(&self) -> &[SetupStep] {
        &self.active().setup_steps
    }

    pub fn subject_prompt(&self) -> &str {
        &self.active().subject_prompt
    }

    pub fn oracles(&self) -> &[Oracle] {
        &self.active().oracles
    }

    /// Applies `delta` producing a new specification value. An empty delta
    /// returns an identical copy without a new revision.
    pub fn revise_at(
        &self,
        role: SpecialistRole,
        delta: &RevisionDelta,
        timestamp: i64,
    ) -> Result<TestSpecification, SpecError> {
        if !role.may_revise() {
            return Err(SpecError::RoleViolation(role));
        }
        if delta.is_empty() {
            return Ok(self.clone());
        }
        if delta.description.trim().is_empty() {
            return Err(SpecError::EmptyDescription);
        }

        let before = self.active();
        let mut next = before.clone();
        for edit in &delta.edits {
            apply_edit(&mut next, edit)?;
        }

        let dangling = |s: &SpecSnapshot| -> Vec<CoherenceViolation> {
            coherence_check(s)
                .into_iter()
                .filter(|v| matches!(v, CoherenceViolation::OracleReferencesUnknownEntity { .. }))
                .collect()
        };
        let old = dangling(before);
        let introduced: Vec<_> = dangling(&next).into_iter().filter(|v| !old.contains(v)).collect();
        if !introduced.is_empty() {
            return Err(SpecError::IncoherentRevision(introduced));
        }

        let mut out = self.clone();
        let before_id = out.active_id();
        out.snapshots.push(Arc::new(next));
        out.revisions.push(Revision {
            author_role: Some(role),
            timestamp,
            description: delta.description.clone(),
            before: Some(before_id),
            after: out.active_id(),
        });
        Ok(out)
    }

    /// Canonical JSON with sorted keys.
    pub fn to_canonical_json(&self) -> String {
        canonical_json(self)
    }
}

fn apply_edit(s: &mut SpecSnapshot, edit: &SpecEdit) -> Result<(), SpecError> {
    match edit {
        SpecEdit::AddSetupStep { step } => s.setup_steps.push(step.clone()),
        SpecEdit::RemoveSetupStep { id } => {
            let pos = s
                .setup_steps
                .iter()
                .position(|x| &x.id == id)
                .ok_or_else(|| SpecError::UnknownTarget { kind: "setup step", id: id.clone() })?;
            s.setup_steps.remove(pos);
        }
        SpecEdit::ReplaceSetupStep { step } => {
            let slot = s
                .setup_steps
                .iter_mut()
                .find(|x| x.id == step.id)
                .ok_or_else(|| SpecError::UnknownTarget { kind: "setup step", id: step.id.clone() })?;
            *slot = step.clone();
        }
        SpecEdit::SetPrompt { text, requires, introduces } => {
            s.subject_prompt = text.clone();
            if let Some(r) = requires {
                s.prompt_requires = r.clone();
            }
            if let Some(i) = introduces {
                s.prompt_introduces = i.clone();
            }
        }
        SpecEdit::AddOracle { oracle } => {
            oracle.validate()?;
            s.oracles.push(oracle.clone());
        }
        SpecEdit::RemoveOracle { id } => {
            let pos = s
                .oracles
                .iter()
                .position(|x| &x.id == id)
                .ok_or_else(|| SpecError::UnknownTarget { kind: "oracle", id: id.clone() })?;
            s.oracles.remove(pos);
        }
        SpecEdit::ReplaceOracle { oracle } => {
            oracle.validate()?;
            let slot = s
                .oracles
                .iter_mut()
                .find(|x| x.id == oracle.id)
                .ok_or_else(|| SpecError::UnknownTarget { kind: "oracle", id: oracle.id.clone() })?;
            *slot = oracle.clone();
        }
    }
    Ok(())
}

/// Serializes through `serde_json::Value`, whose maps are sorted.
pub(crate) fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("specification types always serialize");
    serde_json::to_string_pretty(&v).expect("json value always serializes")
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::env::ProbeDomain;

    pub fn email_feature() -> FeatureDescription {
        FeatureDescription::new("email-reply", FeatureDomain::Email, "The agent can reply to an email")
    }

    pub fn web_agent() -> AgentSpecification {
        AgentSpecification {
            name: "mail-assistant".into(),
            platform: Platform::WebApp,
            launch: vec!["https://assistant.local".into()],
            docs: String::new(),
        }
    }

    pub fn step(id: &str, provides: &[&str]) -> SetupStep {
        SetupStep {
            id: id.into(),
            intent: format!("realize {id}"),
            target: SetupTarget::Email,
            provides: provides.iter().map(|s| s.to_string()).collect(),
            tool: None,
        }
    }

    pub fn oracle(id: &str, refs: &[&str]) -> Oracle {
        Oracle {
            id: id.into(),
            description: format!("check {id}"),
            check_kind: CheckKind::EnvProbe,
            probe: Some(ProbeQuery { domain: ProbeDomain::Mail, selector: "sent".into() }),
            references: refs.iter().map(|s| s.to_string()).collect(),
            generalizability_note: "search or scroll are both fine".into(),
        }
    }

    /// The drafted email reply test before the Analyst's fix.
    pub fn draft() -> SpecSnapshot {
        SpecSnapshot {
            setup_steps: vec![step("s1", &["david_email"])],
            subject_prompt: "Reply to David's email from yesterday with Q3 projections.".into(),
            prompt_requires: vec!["david_email".into(), "q3_projection_data".into()],
            prompt_introduces: vec!["reply".into()],
            oracles: vec![oracle("o1", &["david_email", "reply"]), oracle("o2", &["reply"])],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn new_specification_is_an_empty_shell() {
        let spec = new_specification(&email_feature(), &web_agent()).unwrap();
        assert!(spec.setup_steps().is_empty());
        assert!(spec.oracles().is_empty());
        assert!(spec.subject_prompt().is_empty());
        assert_eq!(spec.revisions().len(), 1);
    }

    #[test]
    fn empty_feature_is_rejected() {
        let mut f = email_feature();
        f.id.clear();
        assert!(matches!(
            new_specification(&f, &web_agent()),
            Err(SpecError::InvalidFeature(_))
        ));
        let mut f = email_feature();
        f.text = "  ".into();
        assert!(matches!(
            new_specification(&f, &web_agent()),
            Err(SpecError::InvalidFeature(_))
        ));
    }

    #[test]
    fn duplicate_feature_ids_are_rejected() {
        let f = email_feature();
        assert!(validate_feature_list(&[f.clone(), f]).is_err());
    }

    #[test]
    fn analyst_adds_projection_data_step() {
        let spec = new_specification(&email_feature(), &web_agent()).unwrap();
        let delta = RevisionDelta::new("create Q3 projection data").edit(SpecEdit::AddSetupStep {
            step: step("s2", &["q3_projection_data"]),
        });
        let next = revise_specification(&spec, SpecialistRole::TestAnalyst, &delta).unwrap();
        assert_eq!(spec.revisions().len(), 1);
        assert_eq!(next.revisions().len(), 2);
        assert_eq!(next.setup_steps().len(), spec.setup_steps().len() + 1);
        let rev = &next.revisions()[1];
        assert_eq!(rev.author_role, Some(SpecialistRole::TestAnalyst));
        assert_eq!(rev.before, Some(SnapshotId(0)));
        assert_eq!(rev.after, SnapshotId(1));
    }

    #[test]
    fn judge_may_not_revise() {
        let spec = new_specification(&email_feature(), &web_agent()).unwrap();
        let delta = RevisionDelta::new("x").edit(SpecEdit::AddSetupStep { step: step("s1", &[]) });
        assert_eq!(
            revise_specification(&spec, SpecialistRole::Judge, &delta),
            Err(SpecError::RoleViolation(SpecialistRole::Judge))
        );
    }

    #[test]
    fn empty_delta_is_a_no_op() {
        let spec = new_specification(&email_feature(), &web_agent()).unwrap();
        let next = revise_specification(&spec, SpecialistRole::TestAnalyst, &RevisionDelta::default()).unwrap();
        assert_eq!(next, spec);
    }

    #[test]
    fn empty_description_with_edits_is_rejected() {
        let spec = new_specification(&email_feature(), &web_agent()).unwrap();
        let delta = RevisionDelta::new("").edit(SpecEdit::AddSetupStep { step: step("s1", &[]) });
        assert_eq!(
            revise_specification(&spec, SpecialistRole::TestAnalyst, &delta),
            Err(SpecError::EmptyDescription)
        );
    }

    #[test]
    fn oracle_with_dangling_reference_is_incoherent() {
        let spec = new_specification(&email_feature(), &web_agent()).unwrap();
        let delta = RevisionDelta::new("add check").edit(SpecEdit::AddOracle { oracle: oracle("o1", &["ghost"]) });
        assert!(matches!(
            revise_specification(&spec, SpecialistRole::TestArchitect, &delta),
            Err(SpecError::IncoherentRevision(_))
        ));
    }

    #[test]
    fn removing_a_providing_step_is_incoherent() {
        let spec = new_specification(&email_feature(), &web_agent()).unwrap();
        let spec = revise_specification(
            &spec,
            SpecialistRole::TestArchitect,
            &RevisionDelta::replace_all("draft", spec.active(), draft()),
        )
        .unwrap();
        let delta = RevisionDelta::new("drop email").edit(SpecEdit::RemoveSetupStep { id: "s1".into() });
        assert!(matches!(
            revise_specification(&spec, SpecialistRole::InfrastructureManager, &delta),
            Err(SpecError::IncoherentRevision(_))
        ));
    }

    #[test]
    fn env_probe_oracle_requires_target() {
        let mut o = oracle("o1", &[]);
        o.probe = None;
        assert!(matches!(o.validate(), Err(SpecError::InvalidOracle { .. })));
        let spec = new_specification(&email_feature(), &web_agent()).unwrap();
        let delta = RevisionDelta::new("bad").edit(SpecEdit::AddOracle { oracle: o });
        assert!(revise_specification(&spec, SpecialistRole::TestArchitect, &delta).is_err());
    }

    #[test]
    fn canonical_json_is_stable_and_sorted() {
        let spec = new_specification(&email_feature(), &web_agent()).unwrap();
        let spec = revise_specification(
            &spec,
            SpecialistRole::TestArchitect,
            &RevisionDelta::replace_all("draft", spec.active(), draft()),
        )
        .unwrap();
        let a = spec.to_canonical_json();
        let b = spec.clone().to_canonical_json();
        assert_eq!(a, b);
        let back: TestSpecification = serde_json::from_str(&a).unwrap();
        assert_eq!(back, spec);
        let feature_pos = a.find("\"feature_id\"").unwrap();
        let revisions_pos = a.find("\"revisions\"").unwrap();
        assert!(feature_pos < revisions_pos);
    }

    fn arb_edit() -> impl Strategy<Value = SpecEdit> {
        let keys = prop::sample::select(vec!["a", "b", "c", "d"]);
        let ids = prop::sample::select(vec!["x1", "x2", "x3"]);
        prop_oneof![
            (ids.clone(), prop::collection::vec(keys.clone(), 0..3)).prop_map(|(id, p)| SpecEdit::AddSetupStep {
                step: step(id, &p)
            }),
            ids.clone().prop_map(|id| SpecEdit::RemoveSetupStep { id: id.into() }),
            (ids.clone(), prop::collection::vec(keys.clone(), 0..3)).prop_map(|(id, r)| SpecEdit::AddOracle {
                oracle: oracle(id, &r)
            }),
            ids.prop_map(|id| SpecEdit::RemoveOracle { id: id.into() }),
            prop::collection::vec(keys, 0..3).prop_map(|r| SpecEdit::SetPrompt {
                text: "do it".into(),
                requires: Some(r.into_iter().map(String::from).collect()),
                introduces: None,
            }),
        ]
    }

    proptest! {
        #[test]
        fn revision_history_is_append_only(edits in prop::collection::vec(arb_edit(), 1..12)) {
            let mut spec = new_specification(&email_feature(), &web_agent()).unwrap();
            for (i, e) in edits.into_iter().enumerate() {
                let before_json: Vec<String> = spec.snapshots().map(|(_, s)| canonical_json(s)).collect();
                let delta = RevisionDelta::new(format!("edit {i}")).edit(e);
                if let Ok(next) = revise_specification(&spec, SpecialistRole::TestAnalyst, &delta) {
                    let after_json: Vec<String> = next.snapshots().map(|(_, s)| canonical_json(s)).collect();
                    prop_assert_eq!(&after_json[..before_json.len()], &before_json[..]);
                    prop_assert!(next.revisions().len() == spec.revisions().len() + 1);
                    spec = next;
                }
            }
        }

        #[test]
        fn forbidden_roles_always_error(edits in prop::collection::vec(arb_edit(), 0..4)) {
            let spec = new_specification(&email_feature(), &web_agent()).unwrap();
            let delta = RevisionDelta { description: "anything".into(), edits };
            for role in [SpecialistRole::Engineer, SpecialistRole::Investigator, SpecialistRole::Judge] {
                prop_assert_eq!(
                    revise_specification(&spec, role, &delta),
                    Err(SpecError::RoleViolation(role))
                );
            }
        }
    }
}

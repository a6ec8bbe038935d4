//! Phase 1: the Test Architect drafts, the Test Analyst reflects.

use serde::Deserialize;

use super::prompts::{analyst_followup, analyst_opening, architect_opening, system_prompt};
use super::specialist::{parse_reply, Conversation};
use super::{PhaseAbort, PipelineError, RunState};
use crate::role::SpecialistRole;
use crate::spec::{
    coherence_check, revise_specification, AgentSpecification, FeatureDescription, RevisionDelta, SpecEdit,
    SpecSnapshot, TestSpecification,
};
use crate::tools::registry_for;

pub const REFLECTION_ROUNDS: u32 = 3;

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
enum Reflection {
    Approve,
    Revise {
        #[serde(default)]
        description: String,
        #[serde(default)]
        edits: Vec<SpecEdit>,
    },
}

pub(crate) fn phase1_generate(
    st: &mut RunState,
    feature: &FeatureDescription,
    agent: &AgentSpecification,
    shell: &TestSpecification,
) -> Result<TestSpecification, PhaseAbort> {
    let role = SpecialistRole::TestArchitect;
    let mut architect = Conversation::new(
        role,
        system_prompt(role).into(),
        &registry_for(role, agent.platform),
        architect_opening(feature, agent),
    );
    let reply = architect.ask(st)?;
    let draft: SpecSnapshot = parse_reply(role, &reply).map_err(|e| PipelineError::InvalidDraft(e.to_string()))?;
    let delta = RevisionDelta::replace_all("initial draft", shell.active(), draft);
    let mut spec =
        revise_specification(shell, role, &delta).map_err(|e| PipelineError::InvalidDraft(e.to_string()))?;

    let role = SpecialistRole::TestAnalyst;
    let mut violations = coherence_check(spec.active());
    let mut analyst = Conversation::new(
        role,
        system_prompt(role).into(),
        &registry_for(role, agent.platform),
        analyst_opening(feature, spec.active(), &violations),
    );
    let mut rejected: Option<String> = None;
    for round in 0..REFLECTION_ROUNDS {
        if round > 0 {
            analyst.say(analyst_followup(spec.active(), &violations, rejected.as_deref()));
        }
        let reply = analyst.ask(st)?;
        rejected = None;
        match parse_reply::<Reflection>(role, &reply)? {
            Reflection::Approve => {}
            Reflection::Revise { description, edits } => {
                let delta = RevisionDelta { description, edits };
                match revise_specification(&spec, role, &delta) {
                    Ok(s) => spec = s,
                    Err(e) => rejected = Some(e.to_string()),
                }
            }
        }
        violations = coherence_check(spec.active());
        if violations.is_empty() && rejected.is_none() {
            return Ok(spec);
        }
    }
    if violations.is_empty() {
        Ok(spec)
    } else {
        Err(PipelineError::GenerationIncoherent(violations).into())
    }
}

//! System prompts, one per specialist, and the opening messages built from
//! run state.

use crate::role::SpecialistRole;
use crate::spec::{AgentSpecification, CoherenceViolation, FeatureDescription, SpecSnapshot};

const ARCHITECT: &str = "\
You are the Test Architect. Design one end-to-end test for the feature below.
Reply with a single JSON object with these fields:
  setup_steps: [{id, intent, target: email|file_system|other, provides: [entity keys], tool}]
  subject_prompt: the exact text a user would give the agent
  prompt_requires: entity keys the prompt relies on
  prompt_introduces: entity keys the agent's work will create
  oracles: [{id, description, check_kind: env_probe|screen_evidence|agent_self_report,
             probe: {domain: fs|mail, selector}, references: [entity keys], generalizability_note}]
Setup steps state intent only; the Infrastructure Manager decides the concrete content.
Oracles must accept every valid way of completing the task.";

const ANALYST: &str = "\
You are the Test Analyst. Reflect on the draft test with these guidelines:
  1. Every datum the prompt relies on must be created by a setup step.
  2. Every entity an oracle references must come from setup or from the prompt.
  3. Setup steps must be realizable with send_email, exec_command or probe.
  4. Oracles must be checkable and must not depend on one particular execution path.
  5. The prompt must read like a real user request.
Reply with {\"decision\": \"approve\"} or
{\"decision\": \"revise\", \"description\": why, \"edits\": [edit objects]}.
Edit objects use op add_setup_step|remove_setup_step|replace_setup_step|set_prompt|add_oracle|remove_oracle|replace_oracle.";

const INFRASTRUCTURE: &str = "\
You are the Infrastructure Manager. Realize every setup step with tool calls.
Decide concrete content (names, dates, subjects, file contents) consistent with the test.
Retryable errors are retried for you; if a fault persists, stop and report it.
When finished reply without tool calls using
{\"status\": \"completed\" | \"environment_failure\", \"steps\": {step id: [call ids]},
 \"reason\": optional text, \"revision\": optional {description, edits}}.";

const ENGINEER: &str = "\
You are the Engineer. Deliver the test prompt to the subject agent through its user interface.
Launch or open the agent, focus its input, type the prompt exactly with type_verified,
submit it, then wait_for_completion. Describe what you see as you go.
Never perform the agent's task yourself and never re-prompt to coax success.
When done, reply without tool calls with a short summary of what happened.";

const INVESTIGATOR: &str = "\
You are the Investigator. Inspect the environment after the agent ran.
Use env_diff to see what changed and probe to examine each oracle's target.
When done, reply without tool calls with an organized summary of your findings.";

const JUDGE: &str = "\
You are the Judge. First write questions about the evidence, at least one for each bug criterion:
deviation_from_expected, misreporting, completion_impact, quality_impact, unreasonable_intervention.
Reply {\"questions\": [{id, criterion, text}]}.
Then answer every question from the evidence and decide.
Reply {\"answers\": [{question, answer, evidence: [refs]}],
       \"oracle_results\": {oracle id: pass|fail|unknown},
       \"bugs\": [{criterion, description, evidence: [refs], questions: [ids], oracle}]}.
Evidence refs: {kind: capture, seq, contains} | {kind: finding, id, empty, contains}
             | {kind: diff, entity, change: added|removed|modified|absent} | {kind: commentary, index, contains}.
Report a bug only when the evidence shows it.";

pub fn system_prompt(role: SpecialistRole) -> &'static str {
    match role {
        SpecialistRole::TestArchitect => ARCHITECT,
        SpecialistRole::TestAnalyst => ANALYST,
        SpecialistRole::InfrastructureManager => INFRASTRUCTURE,
        SpecialistRole::Engineer => ENGINEER,
        SpecialistRole::Investigator => INVESTIGATOR,
        SpecialistRole::Judge => JUDGE,
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    crate::spec::canonical_json(v)
}

pub fn architect_opening(feature: &FeatureDescription, agent: &AgentSpecification) -> String {
    format!(
        "Feature `{}` ({:?}): {}\n\nAgent under test: {} on {:?}\nLaunch: {}\nDocs: {}",
        feature.id,
        feature.domain,
        feature.text,
        agent.name,
        agent.platform,
        agent.launch.join(" ; "),
        agent.docs
    )
}

pub fn analyst_opening(feature: &FeatureDescription, draft: &SpecSnapshot, violations: &[CoherenceViolation]) -> String {
    format!(
        "Feature: {}\n\nDraft test:\n{}\n\nAutomatic coherence check:\n{}",
        feature.text,
        json(draft),
        render_violations(violations)
    )
}

pub fn analyst_followup(current: &SpecSnapshot, violations: &[CoherenceViolation], error: Option<&str>) -> String {
    let mut s = String::new();
    if let Some(e) = error {
        s.push_str(&format!("Your revision was rejected: {e}\n\n"));
    }
    s.push_str(&format!(
        "Current test:\n{}\n\nAutomatic coherence check:\n{}",
        json(current),
        render_violations(violations)
    ));
    s
}

fn render_violations(v: &[CoherenceViolation]) -> String {
    if v.is_empty() {
        "no problems found".into()
    } else {
        v.iter().map(|x| format!("- {}", json(x).replace('\n', " "))).collect::<Vec<_>>().join("\n")
    }
}

pub fn infrastructure_opening(spec: &SpecSnapshot) -> String {
    format!(
        "Setup steps:\n{}\n\nPrompt the agent will receive: {}\nThe home directory is /home/user; the user's address is {}.",
        json(&spec.setup_steps),
        spec.subject_prompt,
        crate::env::mail::USER_ADDRESS
    )
}

pub fn engineer_opening(spec: &SpecSnapshot, agent: &AgentSpecification) -> String {
    format!(
        "Agent: {} on {:?}\nLaunch: {}\nDocs: {}\n\nPrompt to deliver, exactly:\n{}",
        agent.name,
        agent.platform,
        agent.launch.join(" ; "),
        agent.docs,
        spec.subject_prompt
    )
}

pub fn investigator_opening(spec: &SpecSnapshot, diff_summary: &str) -> String {
    format!(
        "Prompt given to the agent: {}\n\nOracles:\n{}\n\nChanges since setup:\n{}",
        spec.subject_prompt,
        json(&spec.oracles),
        diff_summary
    )
}

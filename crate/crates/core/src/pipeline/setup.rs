//! Phase 2: the Infrastructure Manager realizes the setup steps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::prompts::{infrastructure_opening, system_prompt};
use super::specialist::{default_message, parse_reply, Conversation};
use super::{PhaseAbort, PipelineError, RunState};
use crate::env::Environment;
use crate::role::SpecialistRole;
use crate::spec::{revise_specification, RevisionDelta, TestSpecification};
use crate::tools::host::EnvToolHost;
use crate::tools::{registry_for, FatalKind, ToolCall, ToolResult, ToolStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupCall {
    pub call: ToolCall,
    pub result: ToolResult,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SetupReport {
    pub calls: Vec<SetupCall>,
    /// Setup step id to the call ids that realized it.
    pub steps: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SetupStatus {
    Completed,
    EnvironmentFailure,
}

#[derive(Debug, Clone, Deserialize)]
struct SetupReply {
    status: SetupStatus,
    #[serde(default)]
    steps: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    reason: Option<String>,
    #[serde(default)]
    revision: Option<RevisionDelta>,
}

pub(crate) type SetupFailure = (Option<SetupReport>, PhaseAbort);

pub(crate) fn phase2_setup(
    st: &mut RunState,
    spec: &TestSpecification,
    env: &mut Environment,
) -> Result<(TestSpecification, SetupReport), SetupFailure> {
    if spec.setup_steps().is_empty() {
        return Ok((spec.clone(), SetupReport::default()));
    }
    let role = SpecialistRole::InfrastructureManager;
    let registry = registry_for(role, crate::spec::Platform::Cli);
    let mut conv =
        Conversation::new(role, system_prompt(role).into(), &registry, infrastructure_opening(spec.active()));
    let first = st.tool_log.len();
    let mut host = EnvToolHost::new(env);
    let mut hook = |g: &mut crate::llm::Gateway, c: &ToolCall, r: &ToolResult| {
        if r.status == ToolStatus::FatalError(FatalKind::RetriesExhausted) {
            if let Some(k) = r.fault() {
                return Err(PhaseAbort::EnvFailure(k.to_string()));
            }
        }
        default_message(g, c, r)
    };
    let outcome = conv.run_tools(st, &registry, &mut host, &mut hook);
    let calls: Vec<SetupCall> = st.tool_log[first..]
        .iter()
        .map(|e| SetupCall { call: e.call.clone(), result: e.result.clone() })
        .collect();
    let mut report = SetupReport { calls, ..Default::default() };
    let text = match outcome {
        Ok(t) => t,
        Err(a) => return Err((Some(report), a)),
    };
    let reply: SetupReply = match parse_reply(role, &text) {
        Ok(r) => r,
        Err(e) => return Err((Some(report), e.into())),
    };
    report.steps = reply.steps;
    report.summary = reply.reason.clone();
    if reply.status == SetupStatus::EnvironmentFailure {
        let last_fault = report.calls.iter().rev().find_map(|c| c.result.fault());
        let reason = match (reply.reason, last_fault) {
            (_, Some(k)) => k.to_string(),
            (Some(r), None) => r,
            (None, None) => "environment failure".into(),
        };
        return Err((Some(report), PhaseAbort::EnvFailure(reason)));
    }
    let spec = match reply.revision.filter(|d| !d.is_empty()) {
        Some(d) => match revise_specification(spec, role, &d) {
            Ok(s) => s,
            Err(e) => return Err((Some(report), e.into())),
        },
        None => spec.clone(),
    };
    let ok_ids: Vec<&str> =
        report.calls.iter().filter(|c| c.result.is_ok()).map(|c| c.call.call_id.as_str()).collect();
    let missing: Vec<String> = spec
        .setup_steps()
        .iter()
        .filter(|s| !report.steps.get(&s.id).is_some_and(|ids| ids.iter().any(|i| ok_ids.contains(&i.as_str()))))
        .map(|s| s.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err((Some(report), PipelineError::SetupIncomplete(missing).into()));
    }
    Ok((spec, report))
}

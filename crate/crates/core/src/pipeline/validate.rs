//! Phase 4: the Investigator examines the environment and the Judge rules.
//!
//! The Judge first asks itself questions about the evidence, at least one per
//! bug criterion, then answers them and reports bugs. Every report must cite
//! evidence that actually exists in the bundle; reports that do not are
//! dropped and their oracle becomes unknown.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::execute::compact;
use super::prompts::{investigator_opening, system_prompt};
use super::specialist::{default_message, parse_reply, Conversation};
use super::{BugCriterion, BugReport, EvidenceBundle, OracleResult, Outcome, PhaseAbort, RunState, Verdict};
use crate::env::{diff, EnvDiff, EnvSnapshot, EnvStatus, Environment, ProbeQuery};
use crate::role::SpecialistRole;
use crate::spec::{AgentSpecification, CheckKind, TestSpecification};
use crate::tools::host::EnvToolHost;
use crate::tools::{registry_for, ToolCall, ToolHost, ToolOutcome};

pub const INSUFFICIENT: &str = "insufficient evidence";

/// One probe result, numbered in the order the Investigator made it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub id: String,
    pub query: ProbeQuery,
    pub status: EnvStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffChange {
    Added,
    Removed,
    Modified,
    /// No change at all under the entity.
    Absent,
}

/// A pointer into the evidence bundle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvidenceRef {
    Capture {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        contains: Option<String>,
    },
    Finding {
        id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        empty: Option<bool>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        contains: Option<String>,
    },
    Diff {
        /// Entity key prefix, e.g. `fs:/home/user/work/projects_backup`.
        entity: String,
        change: DiffChange,
    },
    Commentary {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        index: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        contains: Option<String>,
    },
}

impl EvidenceRef {
    /// Checks the reference against the bundle.
    pub fn resolve(&self, b: &EvidenceBundle) -> Result<(), String> {
        match self {
            EvidenceRef::Capture { seq, contains } => {
                let hit = b.captures.iter().any(|c| {
                    seq.is_none_or(|s| c.seq == s) && contains.as_deref().is_none_or(|t| c.frame.contains(t))
                });
                hit.then_some(()).ok_or_else(|| format!("no capture matches {self:?}"))
            }
            EvidenceRef::Finding { id, empty, contains } => {
                let f = b.investigator_findings.iter().find(|f| &f.id == id).ok_or_else(|| format!("no finding `{id}`"))?;
                if empty.is_some_and(|e| e != f.status.is_empty()) {
                    return Err(format!("finding `{id}` emptiness differs"));
                }
                if contains.as_deref().is_some_and(|t| !f.status.render().contains(t)) {
                    return Err(format!("finding `{id}` does not contain the cited text"));
                }
                Ok(())
            }
            EvidenceRef::Diff { entity, change } => {
                let any = |keys: &[String]| keys.iter().any(|k| k.starts_with(entity.as_str()));
                let d = &b.env_diff;
                let ok = match change {
                    DiffChange::Added => any(&d.added),
                    DiffChange::Removed => any(&d.removed),
                    DiffChange::Modified => any(&d.modified),
                    DiffChange::Absent => !any(&d.added) && !any(&d.removed) && !any(&d.modified),
                };
                ok.then_some(()).ok_or_else(|| format!("environment diff does not show {change:?} for `{entity}`"))
            }
            EvidenceRef::Commentary { index, contains } => {
                let hit = b.engineer_commentary.iter().enumerate().any(|(i, c)| {
                    index.is_none_or(|n| n == i) && contains.as_deref().is_none_or(|t| c.contains(t))
                });
                hit.then_some(()).ok_or_else(|| format!("no commentary matches {self:?}"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub criterion: BugCriterion,
    pub text: String,
    /// Added by the framework to cover a criterion the Judge skipped.
    #[serde(default)]
    pub framework: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub question: String,
    pub answer: String,
    #[serde(default)]
    pub evidence: Vec<EvidenceRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedBug {
    pub bug: BugReport,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetaCot {
    pub questions: Vec<Question>,
    pub answers: Vec<Answer>,
    pub investigator_deployed: bool,
    pub rejected_bugs: Vec<RejectedBug>,
}

#[derive(Debug, Deserialize)]
struct QuestionsReply {
    questions: Vec<JudgeQuestion>,
}

#[derive(Debug, Deserialize)]
struct JudgeQuestion {
    id: String,
    criterion: BugCriterion,
    text: String,
}

#[derive(Debug, Deserialize)]
struct AnswersReply {
    #[serde(default)]
    answers: Vec<Answer>,
    #[serde(default)]
    oracle_results: BTreeMap<String, OracleResult>,
    #[serde(default)]
    bugs: Vec<JudgeBug>,
}

#[derive(Debug, Deserialize)]
struct JudgeBug {
    criterion: BugCriterion,
    description: String,
    #[serde(default)]
    evidence: Vec<EvidenceRef>,
    #[serde(default)]
    questions: Vec<String>,
    #[serde(default)]
    oracle: Option<String>,
}

/// Adds a framework question for every criterion `qs` leaves uncovered.
pub fn cover_criteria(qs: &mut Vec<Question>) {
    for c in BugCriterion::ALL {
        if !qs.iter().any(|q| q.criterion == c) {
            qs.push(Question { id: format!("q-{c}"), criterion: c, text: c.default_question().into(), framework: true });
        }
    }
}

/// Whether the Investigator runs at all.
pub fn investigator_needed(spec: &TestSpecification, env_diff: &EnvDiff) -> bool {
    !env_diff.is_empty() || spec.oracles().iter().any(|o| o.check_kind == CheckKind::EnvProbe)
}

/// Environment tools that number every successful probe as a finding.
struct InvestigatorHost<'a> {
    inner: EnvToolHost<'a>,
    findings: Vec<Finding>,
}

impl ToolHost for InvestigatorHost<'_> {
    fn invoke(&mut self, call: &ToolCall) -> ToolOutcome {
        let out = self.inner.invoke(call);
        if let ToolOutcome::Ok { observation, payload } = out {
            if call.tool == "probe" {
                let parsed = serde_json::from_value::<ProbeQuery>(payload["query"].clone())
                    .ok()
                    .zip(serde_json::from_value::<EnvStatus>(payload["result"].clone()).ok());
                if let Some((query, status)) = parsed {
                    let id = format!("f{}", self.findings.len() + 1);
                    self.findings.push(Finding { id: id.clone(), query, status });
                    let mut payload = payload;
                    payload["finding"] = Value::String(id.clone());
                    return ToolOutcome::Ok { observation: format!("finding {id}\n{observation}"), payload };
                }
            }
            return ToolOutcome::Ok { observation, payload };
        }
        out
    }
}

fn diff_summary(d: &EnvDiff) -> String {
    if d.is_empty() {
        return "no changes".into();
    }
    let mut s = String::new();
    for (label, keys) in [("added", &d.added), ("removed", &d.removed), ("modified", &d.modified)] {
        for k in keys {
            s.push_str(&format!("{label}: {k}\n"));
        }
    }
    s
}

const MAX_CAPTURES_SHOWN: usize = 40;

fn judge_context(spec: &TestSpecification, b: &EvidenceBundle) -> String {
    let mut s = format!(
        "Prompt given to the agent: {}\nPrompt delivered: {}\n\nOracles:\n{}\n\nEngineer commentary:\n",
        spec.subject_prompt(),
        b.prompt_delivered,
        crate::spec::canonical_json(&spec.oracles())
    );
    for (i, c) in b.engineer_commentary.iter().enumerate() {
        s.push_str(&format!("[{i}] {c}\n"));
    }
    s.push_str("\nScreen captures:\n");
    let n = b.captures.len();
    for (i, c) in b.captures.iter().enumerate() {
        if n > MAX_CAPTURES_SHOWN && i >= 5 && i < n - (MAX_CAPTURES_SHOWN - 5) {
            continue;
        }
        s.push_str(&format!("--- capture {} at {:.0}s ---\n{}\n", c.seq, c.timestamp, compact(&c.frame)));
    }
    s.push_str(&format!("\nEnvironment changes since setup:\n{}\n", diff_summary(&b.env_diff)));
    s.push_str("\nInvestigator findings:\n");
    for f in &b.investigator_findings {
        s.push_str(&format!("[{}] {:?} {}\n{}\n", f.id, f.query.domain, f.query.selector, f.status.render()));
    }
    if !b.investigator_summary.is_empty() {
        s.push_str(&format!("\nInvestigator summary:\n{}\n", b.investigator_summary));
    }
    s
}

fn render_questions(qs: &[Question]) -> String {
    let mut s = String::from("Answer each question from the evidence, then decide.\n");
    for q in qs {
        s.push_str(&format!("{} [{}] {}\n", q.id, q.criterion, q.text));
    }
    s
}

pub(crate) fn phase4_validate(
    st: &mut RunState,
    spec: &TestSpecification,
    agent: &AgentSpecification,
    bundle: &mut EvidenceBundle,
    env: &mut Environment,
    baseline: EnvSnapshot,
) -> Result<(Verdict, MetaCot), PhaseAbort> {
    bundle.env_diff = diff(&baseline, &env.snapshot());
    let mut meta = MetaCot::default();

    if investigator_needed(spec, &bundle.env_diff) {
        meta.investigator_deployed = true;
        let role = SpecialistRole::Investigator;
        let registry = registry_for(role, agent.platform);
        let mut conv = Conversation::new(
            role,
            system_prompt(role).into(),
            &registry,
            investigator_opening(spec.active(), &diff_summary(&bundle.env_diff)),
        );
        let mut host = InvestigatorHost { inner: EnvToolHost::with_baseline(env, baseline), findings: Vec::new() };
        let summary = conv.run_tools(st, &registry, &mut host, &mut default_message)?;
        bundle.investigator_findings = host.findings;
        bundle.investigator_summary = summary;
    }

    let oracle_ids: Vec<String> = spec.oracles().iter().map(|o| o.id.clone()).collect();
    let mut results: BTreeMap<String, OracleResult> =
        oracle_ids.iter().map(|id| (id.clone(), OracleResult::Unknown)).collect();

    if bundle.is_empty() {
        cover_criteria(&mut meta.questions);
        meta.answers = meta
            .questions
            .iter()
            .map(|q| Answer { question: q.id.clone(), answer: INSUFFICIENT.into(), evidence: Vec::new() })
            .collect();
        return Ok((Verdict { outcome: Outcome::Pass, oracle_results: results }, meta));
    }

    let role = SpecialistRole::Judge;
    let registry = registry_for(role, agent.platform);
    let mut judge = Conversation::new(role, system_prompt(role).into(), &registry, judge_context(spec, bundle));
    let reply = judge.ask(st)?;
    let asked: QuestionsReply = parse_reply(role, &reply)?;
    let mut seen = BTreeSet::new();
    meta.questions = asked
        .questions
        .into_iter()
        .filter(|q| seen.insert(q.id.clone()))
        .map(|q| Question { id: q.id, criterion: q.criterion, text: q.text, framework: false })
        .collect();
    cover_criteria(&mut meta.questions);
    judge.say(render_questions(&meta.questions));
    let reply = judge.ask(st)?;
    let decided: AnswersReply = parse_reply(role, &reply)?;

    let question_ids: BTreeSet<&str> = meta.questions.iter().map(|q| q.id.as_str()).collect();
    let mut answers: Vec<Answer> =
        decided.answers.into_iter().filter(|a| question_ids.contains(a.question.as_str())).collect();
    for q in &meta.questions {
        if !answers.iter().any(|a| a.question == q.id) {
            answers.push(Answer { question: q.id.clone(), answer: INSUFFICIENT.into(), evidence: Vec::new() });
        }
    }
    let answered: BTreeSet<String> =
        answers.iter().filter(|a| a.answer != INSUFFICIENT).map(|a| a.question.clone()).collect();
    meta.answers = answers;

    for (id, r) in decided.oracle_results {
        if let Some(slot) = results.get_mut(&id) {
            *slot = r;
        }
    }
    for o in spec.oracles() {
        let grounded = match o.check_kind {
            CheckKind::EnvProbe => {
                o.probe.as_ref().is_some_and(|p| bundle.investigator_findings.iter().any(|f| &f.query == p))
            }
            CheckKind::ScreenEvidence => !bundle.captures.is_empty(),
            CheckKind::AgentSelfReport => !bundle.captures.is_empty() || !bundle.engineer_commentary.is_empty(),
        };
        if !grounded {
            results.insert(o.id.clone(), OracleResult::Unknown);
        }
    }

    let mut bugs = Vec::new();
    for b in decided.bugs {
        let report = BugReport {
            criterion: b.criterion,
            description: b.description,
            evidence_refs: b.evidence,
            questions: b.questions,
            oracle: b.oracle,
            invalid_for_psr: !bundle.prompt_delivered,
        };
        match ground(&report, bundle, &answered, &oracle_ids) {
            Ok(()) => bugs.push(report),
            Err(reason) => {
                if let Some(o) = &report.oracle {
                    if let Some(slot) = results.get_mut(o) {
                        *slot = OracleResult::Unknown;
                    }
                }
                meta.rejected_bugs.push(RejectedBug { bug: report, reason });
            }
        }
    }
    let outcome = if bugs.is_empty() { Outcome::Pass } else { Outcome::Bugs { bugs } };
    Ok((Verdict { outcome, oracle_results: results }, meta))
}

/// Why `bug` is not backed by the bundle, if it is not.
pub fn ground(
    bug: &BugReport,
    bundle: &EvidenceBundle,
    answered: &BTreeSet<String>,
    oracle_ids: &[String],
) -> Result<(), String> {
    if bug.evidence_refs.is_empty() {
        return Err("no evidence cited".into());
    }
    for r in &bug.evidence_refs {
        r.resolve(bundle)?;
    }
    if bug.questions.is_empty() {
        return Err("no Meta-CoT question cited".into());
    }
    if let Some(q) = bug.questions.iter().find(|q| !answered.contains(*q)) {
        return Err(format!("question `{q}` was not answered"));
    }
    if let Some(o) = &bug.oracle {
        if !oracle_ids.contains(o) {
            return Err(format!("unknown oracle `{o}`"));
        }
    }
    Ok(())
}


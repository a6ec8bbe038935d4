//! The four-phase test run.
//!
//! Generation drafts and reflects on the bundled specification, Setup
//! realizes it in the environment, Execution delivers the prompt to the
//! subject agent through the screen, and Validation investigates the
//! environment and judges the evidence. Each phase is driven by its own
//! specialists with their own tool registries; an abort stops the run.

pub mod execute;
pub mod generate;
pub mod prompts;
pub mod record;
pub mod setup;
pub mod specialist;
pub mod validate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::env::{EnvDiff, EnvSnapshot, Environment, FaultEvent, FaultSpec};
use crate::llm::{Exchange, Gateway, LlmError, TokenLedger};
use crate::mock::{BehaviorScript, MockKind};
use crate::role::{Phase, SpecialistRole};
use crate::spec::{
    new_specification, AgentSpecification, CoherenceViolation, FeatureDescription, SnapshotId, SpecError,
    TestSpecification,
};
use crate::tools::{AttemptRecord, ToolCall, ToolResult, DEFAULT_MAX_RETRIES};
use crate::ui::ScreenCapture;

pub use execute::Session;
pub use setup::SetupReport;
pub use validate::{EvidenceRef, Finding, MetaCot, Question, Answer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BugCriterion {
    DeviationFromExpected,
    Misreporting,
    CompletionImpact,
    QualityImpact,
    UnreasonableIntervention,
}

impl BugCriterion {
    pub const ALL: [BugCriterion; 5] = [
        BugCriterion::DeviationFromExpected,
        BugCriterion::Misreporting,
        BugCriterion::CompletionImpact,
        BugCriterion::QualityImpact,
        BugCriterion::UnreasonableIntervention,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BugCriterion::DeviationFromExpected => "deviation_from_expected",
            BugCriterion::Misreporting => "misreporting",
            BugCriterion::CompletionImpact => "completion_impact",
            BugCriterion::QualityImpact => "quality_impact",
            BugCriterion::UnreasonableIntervention => "unreasonable_intervention",
        }
    }

    /// Question asked for this criterion when the Judge leaves it uncovered.
    pub fn default_question(self) -> &'static str {
        match self {
            BugCriterion::DeviationFromExpected => "Did the agent deviate unreasonably from the expected behavior?",
            BugCriterion::Misreporting => "Did the agent report anything that contradicts what actually happened?",
            BugCriterion::CompletionImpact => "Was the requested task left incomplete?",
            BugCriterion::QualityImpact => "Is the quality of the produced outcome impaired?",
            BugCriterion::UnreasonableIntervention => "Did the agent need or ask for unreasonable user intervention?",
        }
    }
}

impl std::fmt::Display for BugCriterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseStatus {
    Completed,
    AbortedEnvFailure,
    AbortedFatal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: Phase,
    pub status: PhaseStatus,
    pub spec_in: SnapshotId,
    pub spec_out: SnapshotId,
    /// Relative path of the phase transcript inside the run directory.
    pub transcript: String,
    /// Indices into the run's exchange log.
    pub exchanges: (usize, usize),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("architect draft rejected: {0}")]
    InvalidDraft(String),
    #[error("specification still incoherent after reflection: {0:?}")]
    GenerationIncoherent(Vec<CoherenceViolation>),
    #[error("setup steps not realized: {0:?}")]
    SetupIncomplete(Vec<String>),
    #[error("{role} reply could not be used: {reason}")]
    MalformedReply { role: SpecialistRole, reason: String },
    #[error("{role} exceeded {turns} turns")]
    TurnLimit { role: SpecialistRole, turns: u32 },
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("i/o: {0}")]
    Io(String),
}

/// Why a phase stopped the run.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseAbort {
    EnvFailure(String),
    Fatal(PipelineError),
}

impl From<PipelineError> for PhaseAbort {
    fn from(e: PipelineError) -> Self {
        PhaseAbort::Fatal(e)
    }
}

impl From<LlmError> for PhaseAbort {
    fn from(e: LlmError) -> Self {
        PhaseAbort::Fatal(e.into())
    }
}

impl From<SpecError> for PhaseAbort {
    fn from(e: SpecError) -> Self {
        PhaseAbort::Fatal(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleResult {
    Pass,
    Fail,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugReport {
    pub criterion: BugCriterion,
    pub description: String,
    pub evidence_refs: Vec<EvidenceRef>,
    /// Ids of the answered Meta-CoT questions the report rests on.
    pub questions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<String>,
    /// Set when the prompt never verifiably reached the subject agent.
    #[serde(default)]
    pub invalid_for_psr: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Bugs { bugs: Vec<BugReport> },
    EnvironmentFailure { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    #[serde(flatten)]
    pub outcome: Outcome,
    pub oracle_results: BTreeMap<String, OracleResult>,
}

impl Verdict {
    pub fn bugs(&self) -> &[BugReport] {
        match &self.outcome {
            Outcome::Bugs { bugs } => bugs,
            _ => &[],
        }
    }

    pub fn environment_failure(reason: impl Into<String>) -> Self {
        Verdict { outcome: Outcome::EnvironmentFailure { reason: reason.into() }, oracle_results: BTreeMap::new() }
    }
}

/// Where the prompt was seen on screen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptEvidence {
    /// Capture showing the verified typed prompt.
    pub typed_seq: u64,
    /// First later capture, showing the screen reacted.
    pub reaction_seq: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvidenceBundle {
    pub engineer_commentary: Vec<String>,
    /// Stored as frame files in the run directory.
    #[serde(skip)]
    pub captures: Vec<ScreenCapture>,
    pub env_diff: EnvDiff,
    pub investigator_findings: Vec<Finding>,
    #[serde(default)]
    pub investigator_summary: String,
    pub prompt_delivered: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_evidence: Option<PromptEvidence>,
    /// The subject was still working when the wait ran out.
    #[serde(default)]
    pub timed_out: bool,
}

impl EvidenceBundle {
    pub fn is_empty(&self) -> bool {
        self.engineer_commentary.is_empty()
            && self.captures.is_empty()
            && self.env_diff.is_empty()
            && self.investigator_findings.is_empty()
    }
}

/// One tool invocation as the pipeline saw it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolLogEntry {
    pub role: SpecialistRole,
    pub call: ToolCall,
    pub result: ToolResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectConfig {
    pub kind: MockKind,
    pub script: BehaviorScript,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub max_retries: u32,
    /// Model turns allowed per specialist conversation.
    pub turn_cap: u32,
    pub wait_timeout_secs: u32,
    pub quiescence_secs: u32,
    pub subject: Option<SubjectConfig>,
    /// Faults injected before setup starts.
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_retries: DEFAULT_MAX_RETRIES,
            turn_cap: 24,
            wait_timeout_secs: 120,
            quiescence_secs: 10,
            subject: None,
            faults: Vec::new(),
        }
    }
}

/// Everything a run produced, up to the point it stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub feature: FeatureDescription,
    pub agent: AgentSpecification,
    pub spec: TestSpecification,
    pub phases: Vec<PhaseRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setup: Option<SetupReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<EvidenceBundle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta_cot: Option<MetaCot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    /// Set when the run stopped on a framework error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub tool_log: Vec<ToolLogEntry>,
    pub attempts: Vec<AttemptRecord>,
    /// Attempt budget per environment call in force for this run.
    #[serde(default)]
    pub max_retries: u32,
    pub fault_log: Vec<FaultEvent>,
    pub ledger: TokenLedger,
    pub exchanges: Vec<Exchange>,
}

impl RunRecord {
    pub fn phase(&self, p: Phase) -> Option<&PhaseRecord> {
        self.phases.iter().find(|r| r.phase == p)
    }

    pub fn tools_used_by(&self, role: SpecialistRole) -> Vec<&str> {
        self.tool_log.iter().filter(|e| e.role == role).map(|e| e.call.tool.as_str()).collect()
    }
}

/// Mutable state threaded through the phases.
pub(crate) struct RunState<'a> {
    pub gateway: &'a mut Gateway,
    pub cfg: &'a RunConfig,
    pub tool_log: Vec<ToolLogEntry>,
    pub attempts: Vec<AttemptRecord>,
}

fn phase_file(p: Phase) -> String {
    let name = match p {
        Phase::Generation => "generation",
        Phase::Setup => "setup",
        Phase::Execution => "execution",
        Phase::Validation => "validation",
    };
    format!("transcripts/{name}.json")
}

/// Runs all four phases for `feature` against the subject in `cfg`.
pub fn run_test(
    feature: &FeatureDescription,
    agent: &AgentSpecification,
    env: &mut Environment,
    gateway: &mut Gateway,
    cfg: &RunConfig,
) -> RunRecord {
    let mut spec = match new_specification(feature, agent) {
        Ok(s) => s,
        Err(e) => {
            return RunRecord {
                feature: feature.clone(),
                agent: agent.clone(),
                spec: empty_spec(feature),
                phases: Vec::new(),
                setup: None,
                evidence: None,
                meta_cot: None,
                verdict: None,
                error: Some(e.to_string()),
                tool_log: Vec::new(),
                attempts: Vec::new(),
                max_retries: cfg.max_retries,
                fault_log: Vec::new(),
                ledger: gateway.ledger().clone(),
                exchanges: gateway.exchanges().to_vec(),
            }
        }
    };
    for f in &cfg.faults {
        env.inject_fault(*f);
    }
    let mut st = RunState { gateway, cfg, tool_log: Vec::new(), attempts: Vec::new() };
    let mut phases = Vec::new();
    let mut setup_report = None;
    let mut evidence = None;
    let mut meta = None;
    let mut verdict = None;
    let mut error = None;

    'run: {
        // Generation
        st.gateway.enter_phase(Phase::Generation);
        let start = st.gateway.exchanges().len();
        let spec_in = spec.active_id();
        let r = generate::phase1_generate(&mut st, feature, agent, &spec).map(|s| spec = s);
        if let Some(a) = finish(&mut phases, &mut st, Phase::Generation, spec_in, spec.active_id(), start, r) {
            error = abort_error(&a, &mut verdict);
            break 'run;
        }

        // Setup
        st.gateway.enter_phase(Phase::Setup);
        let start = st.gateway.exchanges().len();
        let spec_in = spec.active_id();
        let r = setup::phase2_setup(&mut st, &spec, env);
        let r = match r {
            Ok((s, report)) => {
                spec = s;
                setup_report = Some(report);
                Ok(())
            }
            Err((report, a)) => {
                setup_report = report;
                Err(a)
            }
        };
        if let Some(a) = finish(&mut phases, &mut st, Phase::Setup, spec_in, spec.active_id(), start, r) {
            error = abort_error(&a, &mut verdict);
            break 'run;
        }
        let baseline: EnvSnapshot = env.snapshot();

        // Execution
        st.gateway.enter_phase(Phase::Execution);
        let start = st.gateway.exchanges().len();
        let spec_in = spec.active_id();
        let r = execute::phase3_execute(&mut st, &spec, agent, env);
        let r = match r {
            Ok(b) => {
                evidence = Some(b);
                Ok(())
            }
            Err(a) => Err(a),
        };
        if let Some(a) = finish(&mut phases, &mut st, Phase::Execution, spec_in, spec.active_id(), start, r) {
            error = abort_error(&a, &mut verdict);
            break 'run;
        }

        // Validation
        st.gateway.enter_phase(Phase::Validation);
        let start = st.gateway.exchanges().len();
        let spec_in = spec.active_id();
        let bundle = evidence.as_mut().expect("execution produced a bundle");
        let r = validate::phase4_validate(&mut st, &spec, agent, bundle, env, baseline);
        let r = match r {
            Ok((v, m)) => {
                verdict = Some(v);
                meta = Some(m);
                Ok(())
            }
            Err(a) => Err(a),
        };
        if let Some(a) = finish(&mut phases, &mut st, Phase::Validation, spec_in, spec.active_id(), start, r) {
            error = abort_error(&a, &mut verdict);
        }
    }

    RunRecord {
        feature: feature.clone(),
        agent: agent.clone(),
        spec,
        phases,
        setup: setup_report,
        evidence,
        meta_cot: meta,
        verdict,
        error,
        tool_log: st.tool_log,
        attempts: st.attempts,
        max_retries: cfg.max_retries,
        fault_log: env.fault_log().to_vec(),
        ledger: st.gateway.ledger().clone(),
        exchanges: st.gateway.exchanges().to_vec(),
    }
}

fn finish(
    phases: &mut Vec<PhaseRecord>,
    st: &mut RunState,
    phase: Phase,
    spec_in: SnapshotId,
    spec_out: SnapshotId,
    start: usize,
    outcome: Result<(), PhaseAbort>,
) -> Option<PhaseAbort> {
    st.gateway.close_phase();
    let end = st.gateway.exchanges().len();
    let (status, detail) = match &outcome {
        Ok(()) => (PhaseStatus::Completed, None),
        Err(PhaseAbort::EnvFailure(r)) => (PhaseStatus::AbortedEnvFailure, Some(r.clone())),
        Err(PhaseAbort::Fatal(e)) => (PhaseStatus::AbortedFatal, Some(e.to_string())),
    };
    phases.push(PhaseRecord { phase, status, spec_in, spec_out, transcript: phase_file(phase), exchanges: (start, end), detail });
    outcome.err()
}

fn abort_error(a: &PhaseAbort, verdict: &mut Option<Verdict>) -> Option<String> {
    match a {
        PhaseAbort::EnvFailure(reason) => {
            *verdict = Some(Verdict::environment_failure(reason.clone()));
            None
        }
        PhaseAbort::Fatal(e) => Some(e.to_string()),
    }
}

fn empty_spec(feature: &FeatureDescription) -> TestSpecification {
    let placeholder = FeatureDescription::new(
        if feature.id.trim().is_empty() { "invalid" } else { feature.id.as_str() },
        feature.domain,
        "invalid feature",
    );
    let agent = AgentSpecification {
        name: "none".into(),
        platform: crate::spec::Platform::Cli,
        launch: vec!["none".into()],
        docs: String::new(),
    };
    new_specification(&placeholder, &agent).expect("placeholder specification is valid")
}

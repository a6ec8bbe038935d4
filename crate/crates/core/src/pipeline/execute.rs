//! Phase 3: the Engineer delivers the prompt through the screen.
//!
//! The [`Session`] owns the screen, the subject agent and a virtual clock.
//! Every UI action costs one second, during which the subject agent gets to
//! react; every distinct frame is captured.

use serde_json::{json, Value};

use super::prompts::{engineer_opening, system_prompt};
use super::specialist::{render_result, Conversation};
use super::{EvidenceBundle, PhaseAbort, PromptEvidence, RunConfig, RunState, SubjectConfig};
use crate::env::Environment;
use crate::llm::{Gateway, Message};
use crate::mock::{spawn, SubjectAgent};
use crate::role::SpecialistRole;
use crate::spec::{AgentSpecification, TestSpecification};
use crate::tools::{registry_for, FatalKind, ToolCall, ToolHost, ToolOutcome, ToolResult};
use crate::ui::{
    click_text, type_verified, CaptureRecorder, CaptureTrigger, ClickResult, Frame, PositionHint, Relation, Screen,
    ScreenBackend, ScreenCapture, TypeResult, VirtualTerminal,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaitOutcome {
    /// The subject showed its completion marker and went idle.
    Completed,
    /// Nothing changed on screen for the quiescence window.
    Quiescent,
    TimedOut,
}

pub struct Session {
    pub screen: Screen,
    subject_cfg: Option<SubjectConfig>,
    subject: Option<Box<dyn SubjectAgent>>,
    clock: f64,
    recorder: CaptureRecorder,
    typed: Vec<(String, u64)>,
    timed_out: bool,
    quiescence_secs: u32,
}

impl Session {
    pub fn new(screen: Screen, subject: Option<SubjectConfig>, cfg: &RunConfig) -> Self {
        let baseline = screen.frame().unwrap_or_else(|_| Frame::from_text(0, 0, ""));
        Session {
            screen,
            subject_cfg: subject,
            subject: None,
            clock: 0.0,
            recorder: CaptureRecorder::new(baseline),
            typed: Vec::new(),
            timed_out: false,
            quiescence_secs: cfg.quiescence_secs.max(1),
        }
    }

    /// A virtual-terminal session for `subject`.
    pub fn virtual_terminal(subject: Option<SubjectConfig>, cfg: &RunConfig) -> Self {
        Session::new(Screen::Virtual(VirtualTerminal::default()), subject, cfg)
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn captures(&self) -> &[ScreenCapture] {
        self.recorder.captures()
    }

    pub fn subject(&self) -> Option<&dyn SubjectAgent> {
        self.subject.as_deref()
    }

    pub fn timed_out(&self) -> bool {
        self.timed_out
    }

    fn observe(&mut self) -> Option<u64> {
        let f = self.screen.frame().ok()?;
        self.recorder.observe(&f, self.clock)
    }

    /// Advances one second, lets the subject react and captures changes.
    pub fn tick(&mut self, env: &mut Environment) -> Option<u64> {
        self.clock += 1.0;
        if let (Some(s), Some(t)) = (self.subject.as_mut(), self.screen.terminal_mut()) {
            s.step(t, env, self.clock);
        }
        self.observe()
    }

    /// Starts the configured subject agent on the screen.
    pub fn launch(&mut self, env: &mut Environment) -> Result<bool, String> {
        if self.subject.is_some() {
            return Ok(false);
        }
        let cfg = self.subject_cfg.as_ref().ok_or("no subject agent is configured for this session")?;
        let agent = spawn(cfg.kind, &cfg.script, &mut self.screen, env).map_err(|e| e.to_string())?;
        self.subject = Some(agent);
        self.observe();
        Ok(true)
    }

    /// Ticks until the subject finishes, the screen goes quiet or `timeout` passes.
    pub fn wait(&mut self, env: &mut Environment, timeout: u32) -> WaitOutcome {
        let mut quiet = 0;
        for _ in 0..timeout {
            let changed = self.tick(env).is_some();
            if let (Some(s), Ok(f)) = (self.subject.as_deref(), self.screen.frame()) {
                if !s.busy() && !s.prompts().is_empty() && f.contains(s.completion_marker()) {
                    return WaitOutcome::Completed;
                }
            }
            quiet = if changed { 0 } else { quiet + 1 };
            if quiet >= self.quiescence_secs {
                return WaitOutcome::Quiescent;
            }
        }
        self.timed_out = true;
        WaitOutcome::TimedOut
    }

    /// Verified typing of `prompt` plus a later screen change, if both happened.
    pub fn prompt_evidence(&self, prompt: &str) -> Option<PromptEvidence> {
        self.typed.iter().filter(|(t, _)| t == prompt).find_map(|&(_, typed_seq)| {
            self.captures()
                .iter()
                .find(|c| c.seq > typed_seq)
                .map(|c| PromptEvidence { typed_seq, reaction_seq: c.seq })
        })
    }

    fn screen_text(&self) -> String {
        self.screen.frame().map(|f| compact(&f)).unwrap_or_default()
    }
}

/// Frame text without trailing blanks.
pub fn compact(f: &Frame) -> String {
    let lines: Vec<&str> = (0..f.rows()).map(|r| f.row(r).trim_end()).collect();
    let n = lines.iter().rposition(|l| !l.is_empty()).map_or(0, |i| i + 1);
    lines[..n].join("\n")
}

/// The Engineer's tools over a session.
pub struct EngineerHost<'a> {
    pub session: &'a mut Session,
    pub env: &'a mut Environment,
    pub wait_timeout: u32,
}

fn screen_fatal(e: impl std::fmt::Display) -> ToolOutcome {
    ToolOutcome::Fatal { kind: FatalKind::ScreenError, message: e.to_string() }
}

fn hint_from(call: &ToolCall) -> Result<Option<PositionHint>, String> {
    let relation = match call.args.get("relation") {
        None | Some(Value::Null) => None,
        Some(v) => Some(serde_json::from_value::<Relation>(v.clone()).map_err(|_| format!("unknown relation {v}"))?),
    };
    let anchor = call.str_arg("anchor").map(String::from);
    let ordinal = call.int_arg("ordinal").map(|n| n.max(0) as usize);
    Ok(match (relation, ordinal) {
        (None, None) => None,
        (None, Some(n)) => Some(PositionHint::nth(n)),
        (Some(r), ordinal) => Some(PositionHint { relation: r, anchor, ordinal }),
    })
}

impl EngineerHost<'_> {
    fn after_action(&mut self, what: String) -> ToolOutcome {
        self.session.observe();
        self.session.tick(self.env);
        ToolOutcome::Ok { observation: format!("{what}\n--- screen ---\n{}", self.session.screen_text()), payload: Value::Null }
    }
}

impl ToolHost for EngineerHost<'_> {
    fn invoke(&mut self, call: &ToolCall) -> ToolOutcome {
        match call.tool.as_str() {
            "launch_agent" | "navigate" => match self.session.launch(self.env) {
                Ok(true) => self.after_action("agent started".into()),
                Ok(false) => self.after_action("agent already running".into()),
                Err(e) => screen_fatal(e),
            },
            "click_text" => {
                let target = call.str_arg("target").unwrap_or_default();
                let hint = match hint_from(call) {
                    Ok(h) => h,
                    Err(m) => return ToolOutcome::Fatal { kind: FatalKind::BadArgs, message: m },
                };
                match click_text(&mut self.session.screen, target, hint.as_ref()) {
                    Ok(ClickResult::Ok { span_id, span }) => self.after_action(format!("clicked {span_id} \"{}\"", span.text)),
                    Ok(ClickResult::NotFound) => ToolOutcome::Retryable {
                        feedback: format!("no visible text matches \"{target}\""),
                        payload: Value::Null,
                    },
                    Ok(ClickResult::Ambiguous { count }) => ToolOutcome::Retryable {
                        feedback: format!("\"{target}\" matches {count} places; add a relation and anchor or an ordinal"),
                        payload: json!({ "count": count }),
                    },
                    Err(crate::ui::ScreenError::InvalidInput(m)) => ToolOutcome::Fatal { kind: FatalKind::BadArgs, message: m },
                    Err(e) => screen_fatal(e),
                }
            }
            "type_verified" => {
                let text = call.str_arg("text").unwrap_or_default().to_string();
                match type_verified(&mut self.session.screen, &text) {
                    Ok(TypeResult::Ok) => {
                        let Some(seq) = self.session.observe() else {
                            return screen_fatal("typed text vanished before capture");
                        };
                        self.session.typed.push((text, seq));
                        self.session.tick(self.env);
                        ToolOutcome::Ok { observation: format!("typed and verified (capture {seq})"), payload: json!({ "seq": seq }) }
                    }
                    Ok(TypeResult::NeedsFocus { feedback }) => ToolOutcome::Retryable { feedback, payload: Value::Null },
                    Ok(TypeResult::VerificationFailed { expected, observed }) => ToolOutcome::Retryable {
                        feedback: format!("verification failed: expected \"{expected}\", screen shows \"{observed}\""),
                        payload: Value::Null,
                    },
                    Err(crate::ui::ScreenError::InvalidInput(m)) => ToolOutcome::Fatal { kind: FatalKind::BadArgs, message: m },
                    Err(e) => screen_fatal(e),
                }
            }
            "press_key" => {
                let key = call.str_arg("key").unwrap_or_default();
                match self.session.screen.press_key(key) {
                    Ok(()) => self.after_action(format!("pressed {key}")),
                    Err(e) => screen_fatal(e),
                }
            }
            "read_screen" => match self.session.screen.frame() {
                Ok(f) => {
                    let seq = self.session.recorder.mark(&f, self.session.clock, CaptureTrigger::Manual);
                    ToolOutcome::Ok { observation: compact(&f), payload: json!({ "seq": seq }) }
                }
                Err(e) => screen_fatal(e),
            },
            "wait_for_completion" => {
                let timeout = call.int_arg("timeout_secs").map_or(self.wait_timeout, |t| t.clamp(1, 3600) as u32);
                let outcome = self.session.wait(self.env, timeout);
                let what = match outcome {
                    WaitOutcome::Completed => "agent reported completion".to_string(),
                    WaitOutcome::Quiescent => format!("screen unchanged for {}s", self.session.quiescence_secs),
                    WaitOutcome::TimedOut => format!("timed out after {timeout}s; agent still working"),
                };
                ToolOutcome::Ok {
                    observation: format!("{what}\n--- screen ---\n{}", self.session.screen_text()),
                    payload: json!({ "outcome": outcome }),
                }
            }
            other => ToolOutcome::Fatal { kind: FatalKind::UnknownTool, message: format!("no handler for `{other}`") },
        }
    }
}

fn engineer_message(g: &mut Gateway, call: &ToolCall, r: &ToolResult) -> Result<Message, PhaseAbort> {
    let m = Message::tool_result(render_result(r));
    match r.payload.get("seq").and_then(Value::as_u64) {
        Some(seq) if r.is_ok() && call.tool == "read_screen" => {
            g.register_frame(seq);
            Ok(m.with_image(seq))
        }
        _ => Ok(m),
    }
}

pub(crate) fn phase3_execute(
    st: &mut RunState,
    spec: &TestSpecification,
    agent: &AgentSpecification,
    env: &mut Environment,
) -> Result<EvidenceBundle, PhaseAbort> {
    let mut session = Session::virtual_terminal(st.cfg.subject.clone(), st.cfg);
    execute_in(st, spec, agent, env, &mut session)
}

pub(crate) fn execute_in(
    st: &mut RunState,
    spec: &TestSpecification,
    agent: &AgentSpecification,
    env: &mut Environment,
    session: &mut Session,
) -> Result<EvidenceBundle, PhaseAbort> {
    let role = SpecialistRole::Engineer;
    let registry = registry_for(role, agent.platform);
    let mut conv =
        Conversation::new(role, system_prompt(role).into(), &registry, engineer_opening(spec.active(), agent));
    let wait_timeout = st.cfg.wait_timeout_secs.max(1);
    let mut host = EngineerHost { session: &mut *session, env, wait_timeout };
    conv.run_tools(st, &registry, &mut host, &mut engineer_message)?;
    let evidence = session.prompt_evidence(spec.subject_prompt());
    Ok(EvidenceBundle {
        engineer_commentary: conv.notes.into_iter().filter(|n| !n.trim().is_empty()).collect(),
        captures: session.captures().to_vec(),
        prompt_delivered: evidence.is_some(),
        prompt_evidence: evidence,
        timed_out: session.timed_out(),
        ..Default::default()
    })
}

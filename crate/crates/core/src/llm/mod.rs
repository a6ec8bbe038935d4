//! Completion interface shared by every specialist.
//!
//! A [`Gateway`] wraps one [`Provider`], attributes each response to a
//! (role, phase) pair in the [`TokenLedger`], retries provider timeouts and
//! rejects tool calls outside the request's tool list.

pub mod http;
pub mod ledger;
pub mod scripted;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::role::{Phase, SpecialistRole};
use crate::tools::{ToolCall, ToolSignature};

pub use http::HttpProvider;
pub use ledger::{cost_estimate, PricingTable, TokenLedger, TokenUsage};
pub use scripted::{RecordingProvider, ScriptedProvider, TranscriptEntry};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("provider timed out")]
    ProviderTimeout,
    #[error("model called a tool it does not have: {0}")]
    ToolHallucination(String),
    #[error("transcript has no entry for {role} turn {turn}")]
    TranscriptExhausted { role: SpecialistRole, turn: u32 },
    #[error("prompt for {role} turn {turn} drifted: expected digest {expected}, got {actual}")]
    DigestMismatch { role: SpecialistRole, turn: u32, expected: String, actual: String },
    #[error("invalid pricing: prices must be non-negative")]
    InvalidPricing,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("provider error: {0}")]
    Provider(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Author {
    User,
    Assistant,
    ToolResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub author: Author,
    pub content: String,
    /// Screen capture sequence number shown alongside the text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<u64>,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message { author: Author::User, content: content.into(), image: None }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message { author: Author::Assistant, content: content.into(), image: None }
    }

    pub fn tool_result(content: impl Into<String>) -> Self {
        Message { author: Author::ToolResult, content: content.into(), image: None }
    }

    pub fn with_image(mut self, seq: u64) -> Self {
        self.image = Some(seq);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub role: SpecialistRole,
    pub system_prompt: String,
    pub messages: Vec<Message>,
    pub available_tools: Vec<ToolSignature>,
}

impl CompletionRequest {
    pub fn new(role: SpecialistRole, system_prompt: impl Into<String>) -> Self {
        CompletionRequest { role, system_prompt: system_prompt.into(), messages: Vec::new(), available_tools: Vec::new() }
    }

    pub fn message(mut self, m: Message) -> Self {
        self.messages.push(m);
        self
    }

    pub fn tools(mut self, t: Vec<ToolSignature>) -> Self {
        self.available_tools = t;
        self
    }

    /// sha256 over the canonical JSON of the whole request.
    pub fn digest(&self) -> String {
        let v = serde_json::to_value(self).unwrap_or_default();
        crate::env::sha256_hex(crate::spec::canonical_json(&v).as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub content: String,
    #[serde(default)]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default)]
    pub usage: TokenUsage,
}

/// A model backend. `turn` counts this role's earlier requests.
pub trait Provider: Send {
    fn complete(&mut self, request: &CompletionRequest, turn: u32) -> Result<CompletionResponse, LlmError>;
}

impl<P: Provider + ?Sized> Provider for Box<P> {
    fn complete(&mut self, request: &CompletionRequest, turn: u32) -> Result<CompletionResponse, LlmError> {
        (**self).complete(request, turn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: 3, base_delay_ms: 1000 }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.base_delay_ms.saturating_mul(1 << attempt.min(20)))
    }
}

/// One request/response pair as logged by the gateway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub role: SpecialistRole,
    pub phase: Phase,
    pub turn: u32,
    pub request_digest: String,
    pub request: CompletionRequest,
    pub response: CompletionResponse,
}

pub type Sleeper = Box<dyn FnMut(Duration) + Send>;

pub struct Gateway {
    provider: Box<dyn Provider>,
    ledger: TokenLedger,
    phase: Phase,
    phase_started: Option<Instant>,
    turns: BTreeMap<SpecialistRole, u32>,
    retry: RetryPolicy,
    sleeper: Sleeper,
    frames: BTreeSet<u64>,
    log: Vec<Exchange>,
}

impl Gateway {
    pub fn new(provider: Box<dyn Provider>) -> Self {
        Gateway {
            provider,
            ledger: TokenLedger::default(),
            phase: Phase::Generation,
            phase_started: None,
            turns: BTreeMap::new(),
            retry: RetryPolicy::default(),
            sleeper: Box::new(std::thread::sleep),
            frames: BTreeSet::new(),
            log: Vec::new(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy, sleeper: Sleeper) -> Self {
        self.retry = retry;
        self.sleeper = sleeper;
        self
    }

    /// Closes the running phase's wall-clock and opens `phase`.
    pub fn enter_phase(&mut self, phase: Phase) {
        self.close_phase();
        self.phase = phase;
        self.phase_started = Some(Instant::now());
    }

    pub fn close_phase(&mut self) {
        if let Some(t) = self.phase_started.take() {
            self.ledger.add_wall_clock(self.phase, t.elapsed().as_secs_f64());
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn register_frame(&mut self, seq: u64) {
        self.frames.insert(seq);
    }

    pub fn ledger(&self) -> &TokenLedger {
        &self.ledger
    }

    pub fn exchanges(&self) -> &[Exchange] {
        &self.log
    }

    pub fn complete(&mut self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        if request.messages.is_empty() {
            return Err(LlmError::InvalidRequest("no messages".into()));
        }
        if let Some(seq) = request.messages.iter().filter_map(|m| m.image).find(|s| !self.frames.contains(s)) {
            return Err(LlmError::InvalidRequest(format!("image ref {seq} is not a captured frame")));
        }
        let turn = self.turns.get(&request.role).copied().unwrap_or(0);
        let mut attempt = 0;
        let response = loop {
            match self.provider.complete(request, turn) {
                Err(LlmError::ProviderTimeout) if attempt + 1 < self.retry.attempts => {
                    (self.sleeper)(self.retry.delay(attempt));
                    attempt += 1;
                }
                other => break other?,
            }
        };
        self.turns.insert(request.role, turn + 1);
        self.ledger.record(request.role, self.phase, response.usage);
        self.log.push(Exchange {
            role: request.role,
            phase: self.phase,
            turn,
            request_digest: request.digest(),
            request: request.clone(),
            response: response.clone(),
        });
        if let Some(bad) = response.tool_calls.iter().find(|c| !request.available_tools.iter().any(|t| t.name == c.tool)) {
            return Err(LlmError::ToolHallucination(bad.tool.clone()));
        }
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::Platform;
    use crate::tools::registry_for;
    use std::sync::{Arc, Mutex};

    fn entry(role: SpecialistRole, turn: u32, content: &str) -> TranscriptEntry {
        TranscriptEntry {
            role,
            turn,
            expected_digest: None,
            content: content.into(),
            tool_calls: vec![],
            usage: TokenUsage::new(100, 10),
            timeouts: 0,
        }
    }

    fn req(role: SpecialistRole) -> CompletionRequest {
        CompletionRequest::new(role, "sys").message(Message::user("go"))
    }

    #[test]
    fn replays_by_role_and_turn() {
        let t = vec![
            entry(SpecialistRole::Judge, 0, "verdict-0"),
            entry(SpecialistRole::Judge, 1, "verdict-1"),
            entry(SpecialistRole::TestArchitect, 0, "draft"),
        ];
        let mut g = Gateway::new(Box::new(ScriptedProvider::new(t)));
        assert_eq!(g.complete(&req(SpecialistRole::Judge)).unwrap().content, "verdict-0");
        assert_eq!(g.complete(&req(SpecialistRole::TestArchitect)).unwrap().content, "draft");
        assert_eq!(g.complete(&req(SpecialistRole::Judge)).unwrap().content, "verdict-1");
        assert_eq!(
            g.complete(&req(SpecialistRole::Judge)),
            Err(LlmError::TranscriptExhausted { role: SpecialistRole::Judge, turn: 2 })
        );
        assert_eq!(g.ledger().total(), TokenUsage::new(300, 30));
    }

    #[test]
    fn hallucinated_tool_is_rejected() {
        let mut e = entry(SpecialistRole::Engineer, 0, "");
        e.tool_calls = vec![ToolCall::new("c1", "rm_rf", serde_json::json!({}))];
        let mut g = Gateway::new(Box::new(ScriptedProvider::new(vec![e])));
        let r = req(SpecialistRole::Engineer).tools(registry_for(SpecialistRole::Engineer, Platform::Cli).tools);
        assert_eq!(g.complete(&r), Err(LlmError::ToolHallucination("rm_rf".into())));
    }

    #[test]
    fn digest_mismatch_fails_loudly() {
        let mut e = entry(SpecialistRole::Judge, 0, "x");
        e.expected_digest = Some("00".into());
        let mut g = Gateway::new(Box::new(ScriptedProvider::new(vec![e.clone()])));
        assert!(matches!(g.complete(&req(SpecialistRole::Judge)), Err(LlmError::DigestMismatch { .. })));
        e.expected_digest = Some(req(SpecialistRole::Judge).digest());
        let mut g = Gateway::new(Box::new(ScriptedProvider::new(vec![e])));
        assert!(g.complete(&req(SpecialistRole::Judge)).is_ok());
    }

    #[test]
    fn timeouts_retry_with_backoff() {
        let slept = Arc::new(Mutex::new(Vec::new()));
        let s = Arc::clone(&slept);
        let mut e = entry(SpecialistRole::Judge, 0, "ok");
        e.timeouts = 2;
        let mut g = Gateway::new(Box::new(ScriptedProvider::new(vec![e.clone()])))
            .with_retry(RetryPolicy::default(), Box::new(move |d| s.lock().unwrap().push(d)));
        assert_eq!(g.complete(&req(SpecialistRole::Judge)).unwrap().content, "ok");
        assert_eq!(*slept.lock().unwrap(), vec![Duration::from_secs(1), Duration::from_secs(2)]);

        e.timeouts = 3;
        let mut g = Gateway::new(Box::new(ScriptedProvider::new(vec![e])))
            .with_retry(RetryPolicy::default(), Box::new(|_| {}));
        assert_eq!(g.complete(&req(SpecialistRole::Judge)), Err(LlmError::ProviderTimeout));
    }

    #[test]
    fn unknown_image_ref_rejected() {
        let mut g = Gateway::new(Box::new(ScriptedProvider::new(vec![entry(SpecialistRole::Judge, 0, "x")])));
        let r = CompletionRequest::new(SpecialistRole::Judge, "s").message(Message::user("see").with_image(4));
        assert!(matches!(g.complete(&r), Err(LlmError::InvalidRequest(_))));
        g.register_frame(4);
        assert!(g.complete(&r).is_ok());
    }

    #[test]
    fn identical_runs_identical_logs() {
        let t = vec![entry(SpecialistRole::Judge, 0, "a"), entry(SpecialistRole::Judge, 1, "b")];
        let run = || {
            let mut g = Gateway::new(Box::new(ScriptedProvider::new(t.clone())));
            g.complete(&req(SpecialistRole::Judge)).unwrap();
            g.complete(&req(SpecialistRole::Judge)).unwrap();
            serde_json::to_string(g.exchanges()).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn phases_attribute_usage() {
        let t = vec![entry(SpecialistRole::TestArchitect, 0, "a"), entry(SpecialistRole::Judge, 0, "b")];
        let mut g = Gateway::new(Box::new(ScriptedProvider::new(t)));
        g.enter_phase(Phase::Generation);
        g.complete(&req(SpecialistRole::TestArchitect)).unwrap();
        g.enter_phase(Phase::Validation);
        g.complete(&req(SpecialistRole::Judge)).unwrap();
        g.close_phase();
        let by_phase = g.ledger().by_phase();
        assert_eq!(by_phase[&Phase::Generation], TokenUsage::new(100, 10));
        assert_eq!(by_phase[&Phase::Validation], TokenUsage::new(100, 10));
        assert!(g.ledger().total_wall_clock() >= 0.0);
    }
}

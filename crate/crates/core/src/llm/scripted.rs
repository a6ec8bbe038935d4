//! Deterministic replay of recorded model turns.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{CompletionRequest, CompletionResponse, LlmError, Provider, TokenUsage};
use crate::role::SpecialistRole;
use crate::tools::ToolCall;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub role: SpecialistRole,
    pub turn: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_digest: Option<String>,
    #[serde(default)]
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default)]
    pub usage: TokenUsage,
    /// Simulated provider timeouts before this turn answers.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub timeouts: u32,
}

fn is_zero(n: &u32) -> bool {
    *n == 0
}

pub fn load_transcript(path: &Path) -> Result<Vec<TranscriptEntry>, LlmError> {
    let data = std::fs::read(path).map_err(|e| LlmError::Provider(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&data).map_err(|e| LlmError::Provider(format!("{}: {e}", path.display())))
}

/// Answers from a transcript keyed by (role, per-role turn).
#[derive(Debug, Clone, Default)]
pub struct ScriptedProvider {
    entries: BTreeMap<(SpecialistRole, u32), TranscriptEntry>,
    timed_out: BTreeMap<(SpecialistRole, u32), u32>,
}

impl ScriptedProvider {
    pub fn new(entries: Vec<TranscriptEntry>) -> Self {
        ScriptedProvider {
            entries: entries.into_iter().map(|e| ((e.role, e.turn), e)).collect(),
            timed_out: BTreeMap::new(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        Ok(Self::new(load_transcript(path)?))
    }
}

impl Provider for ScriptedProvider {
    fn complete(&mut self, request: &CompletionRequest, turn: u32) -> Result<CompletionResponse, LlmError> {
        let key = (request.role, turn);
        let e = self
            .entries
            .get(&key)
            .ok_or(LlmError::TranscriptExhausted { role: request.role, turn })?;
        if let Some(expected) = &e.expected_digest {
            let actual = request.digest();
            if &actual != expected {
                return Err(LlmError::DigestMismatch { role: request.role, turn, expected: expected.clone(), actual });
            }
        }
        let seen = self.timed_out.entry(key).or_default();
        if *seen < e.timeouts {
            *seen += 1;
            return Err(LlmError::ProviderTimeout);
        }
        let tool_calls = e
            .tool_calls
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut c = c.clone();
                if c.call_id.is_empty() {
                    c.call_id = format!("{}-{}-{}", request.role, turn, i);
                }
                c
            })
            .collect();
        Ok(CompletionResponse { content: e.content.clone(), tool_calls, usage: e.usage })
    }
}

/// Passes requests through and keeps a transcript that replays them.
pub struct RecordingProvider<P: Provider> {
    inner: P,
    recorded: Arc<Mutex<Vec<TranscriptEntry>>>,
}

impl<P: Provider> RecordingProvider<P> {
    pub fn new(inner: P) -> Self {
        RecordingProvider { inner, recorded: Arc::default() }
    }

    /// Shared handle to the transcript recorded so far.
    pub fn transcript(&self) -> Arc<Mutex<Vec<TranscriptEntry>>> {
        Arc::clone(&self.recorded)
    }
}

impl<P: Provider> Provider for RecordingProvider<P> {
    fn complete(&mut self, request: &CompletionRequest, turn: u32) -> Result<CompletionResponse, LlmError> {
        let r = self.inner.complete(request, turn)?;
        self.recorded.lock().unwrap_or_else(|p| p.into_inner()).push(TranscriptEntry {
            role: request.role,
            turn,
            expected_digest: Some(request.digest()),
            content: r.content.clone(),
            tool_calls: r.tool_calls.clone(),
            usage: r.usage,
            timeouts: 0,
        });
        Ok(r)
    }
}

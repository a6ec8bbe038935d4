//! The tool-calling conversation loop every specialist runs in.

use serde::de::DeserializeOwned;

use super::{PhaseAbort, PipelineError, RunState, ToolLogEntry};
use crate::llm::{CompletionRequest, Gateway, Message};
use crate::role::SpecialistRole;
use crate::tools::{retry_loop, Registry, ToolCall, ToolHost, ToolResult};

/// Turns a tool result into the message the model sees next.
pub(crate) type ResultHook<'h> = dyn FnMut(&mut Gateway, &ToolCall, &ToolResult) -> Result<Message, PhaseAbort> + 'h;

pub(crate) fn default_message(_: &mut Gateway, _: &ToolCall, r: &ToolResult) -> Result<Message, PhaseAbort> {
    Ok(Message::tool_result(render_result(r)))
}

pub(crate) fn render_result(r: &ToolResult) -> String {
    serde_json::to_string(r).unwrap_or_else(|_| r.observation.clone())
}

fn render_assistant(content: &str, calls: &[ToolCall]) -> String {
    if calls.is_empty() {
        return content.to_string();
    }
    let calls = serde_json::to_string(calls).unwrap_or_default();
    if content.is_empty() {
        format!("[tool calls] {calls}")
    } else {
        format!("{content}\n[tool calls] {calls}")
    }
}

/// A specialist conversation with a fixed system prompt and registry.
pub(crate) struct Conversation {
    pub request: CompletionRequest,
    /// Assistant text of every turn, in order.
    pub notes: Vec<String>,
}

impl Conversation {
    pub fn new(role: SpecialistRole, system_prompt: String, registry: &Registry, opening: String) -> Self {
        let request = CompletionRequest::new(role, system_prompt)
            .tools(registry.tools.clone())
            .message(Message::user(opening));
        Conversation { request, notes: Vec::new() }
    }

    pub fn role(&self) -> SpecialistRole {
        self.request.role
    }

    pub fn say(&mut self, text: String) {
        self.request.messages.push(Message::user(text));
    }

    /// One model turn without tools; returns the reply text.
    pub fn ask(&mut self, st: &mut RunState) -> Result<String, PhaseAbort> {
        let resp = st.gateway.complete(&self.request)?;
        self.request.messages.push(Message::assistant(render_assistant(&resp.content, &resp.tool_calls)));
        self.notes.push(resp.content.clone());
        if let Some(c) = resp.tool_calls.first() {
            return Err(PipelineError::MalformedReply {
                role: self.role(),
                reason: format!("unexpected tool call `{}`", c.tool),
            }
            .into());
        }
        Ok(resp.content)
    }

    /// Runs turns until the model answers without tool calls and returns
    /// that final text.
    pub fn run_tools(
        &mut self,
        st: &mut RunState,
        registry: &Registry,
        host: &mut dyn ToolHost,
        hook: &mut ResultHook<'_>,
    ) -> Result<String, PhaseAbort> {
        for _ in 0..st.cfg.turn_cap {
            let resp = st.gateway.complete(&self.request)?;
            self.request.messages.push(Message::assistant(render_assistant(&resp.content, &resp.tool_calls)));
            self.notes.push(resp.content.clone());
            if resp.tool_calls.is_empty() {
                return Ok(resp.content);
            }
            for call in &resp.tool_calls {
                let result = retry_loop(registry, host, call, st.cfg.max_retries, &mut st.attempts);
                st.tool_log.push(ToolLogEntry { role: self.role(), call: call.clone(), result: result.clone() });
                let msg = hook(st.gateway, call, &result)?;
                self.request.messages.push(msg);
            }
        }
        Err(PipelineError::TurnLimit { role: self.role(), turns: st.cfg.turn_cap }.into())
    }
}

/// Parses the JSON object in a model reply, tolerating code fences and
/// surrounding prose.
pub fn parse_reply<T: DeserializeOwned>(role: SpecialistRole, content: &str) -> Result<T, PipelineError> {
    let malformed = |reason: String| PipelineError::MalformedReply { role, reason };
    let start = content.find('{').ok_or_else(|| malformed("no JSON object in reply".into()))?;
    let end = content.rfind('}').ok_or_else(|| malformed("unterminated JSON object".into()))?;
    if end < start {
        return Err(malformed("unterminated JSON object".into()));
    }
    serde_json::from_str(&content[start..=end]).map_err(|e| malformed(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(serde::Deserialize, Debug, PartialEq)]
    struct D {
        decision: String,
    }

    #[test]
    fn replies_parse_through_fences() {
        let r: D = parse_reply(SpecialistRole::TestAnalyst, "Looks fine.\n```json\n{\"decision\": \"approve\"}\n```").unwrap();
        assert_eq!(r.decision, "approve");
        assert!(parse_reply::<D>(SpecialistRole::TestAnalyst, "no json").is_err());
        assert!(parse_reply::<D>(SpecialistRole::TestAnalyst, "} {").is_err());
    }
}

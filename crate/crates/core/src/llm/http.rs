//! Live provider speaking a generic chat-completions HTTP shape.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Author, CompletionRequest, CompletionResponse, LlmError, Provider, TokenUsage};
use crate::tools::{ParamKind, ToolCall, ToolSignature};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpProviderConfig {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    120
}

pub struct HttpProvider {
    cfg: HttpProviderConfig,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(cfg: HttpProviderConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        HttpProvider { cfg, agent }
    }

    fn body(&self, req: &CompletionRequest) -> Value {
        let mut messages = vec![json!({"role": "system", "content": req.system_prompt})];
        for m in &req.messages {
            let mut content = m.content.clone();
            if let Some(seq) = m.image {
                content.push_str(&format!("\n[screen capture #{seq}]"));
            }
            let role = match m.author {
                Author::User => "user",
                Author::Assistant => "assistant",
                Author::ToolResult => {
                    content = format!("[tool result]\n{content}");
                    "user"
                }
            };
            messages.push(json!({"role": role, "content": content}));
        }
        let mut body = json!({"model": self.cfg.model, "messages": messages});
        if !req.available_tools.is_empty() {
            body["tools"] = Value::Array(req.available_tools.iter().map(function_schema).collect());
        }
        body
    }
}

fn function_schema(t: &ToolSignature) -> Value {
    let mut props = serde_json::Map::new();
    for p in &t.params {
        let ty = match p.kind {
            ParamKind::String => "string",
            ParamKind::Integer => "integer",
            ParamKind::Boolean => "boolean",
            ParamKind::Array => "array",
            ParamKind::Object => "object",
        };
        props.insert(p.name.clone(), json!({"type": ty}));
    }
    let required: Vec<&str> = t.params.iter().filter(|p| p.required).map(|p| p.name.as_str()).collect();
    json!({
        "type": "function",
        "function": {
            "name": t.name,
            "description": t.description,
            "parameters": {"type": "object", "properties": props, "required": required},
        }
    })
}

fn parse_response(v: &Value) -> Result<CompletionResponse, LlmError> {
    let msg = v
        .pointer("/choices/0/message")
        .ok_or_else(|| LlmError::Provider(format!("no choices in response: {v}")))?;
    let content = msg.get("content").and_then(Value::as_str).unwrap_or_default().to_string();
    let mut tool_calls = Vec::new();
    for (i, c) in msg.get("tool_calls").and_then(Value::as_array).into_iter().flatten().enumerate() {
        let name = c.pointer("/function/name").and_then(Value::as_str).unwrap_or_default();
        let args = match c.pointer("/function/arguments") {
            Some(Value::String(s)) => serde_json::from_str(s).unwrap_or(Value::Null),
            Some(other) => other.clone(),
            None => Value::Null,
        };
        let id = c.get("id").and_then(Value::as_str).map(String::from).unwrap_or_else(|| format!("call-{i}"));
        tool_calls.push(ToolCall::new(&id, name, args));
    }
    let n = |p: &str| v.pointer(p).and_then(Value::as_u64).unwrap_or(0);
    let usage = TokenUsage::new(n("/usage/prompt_tokens"), n("/usage/completion_tokens"));
    Ok(CompletionResponse { content, tool_calls, usage })
}

impl Provider for HttpProvider {
    fn complete(&mut self, request: &CompletionRequest, _turn: u32) -> Result<CompletionResponse, LlmError> {
        let url = format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'));
        let mut r = self.agent.post(&url);
        if let Some(k) = &self.cfg.api_key {
            r = r.header("Authorization", format!("Bearer {k}"));
        }
        let mut resp = r.send_json(self.body(request)).map_err(|e| match e {
            ureq::Error::Timeout(_) => LlmError::ProviderTimeout,
            ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => LlmError::ProviderTimeout,
            other => LlmError::Provider(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        let v: Value = resp.body_mut().read_json().map_err(|e| match e {
            ureq::Error::Timeout(_) => LlmError::ProviderTimeout,
            other => LlmError::Provider(other.to_string()),
        })?;
        match status {
            200..=299 => parse_response(&v),
            408 | 504 => Err(LlmError::ProviderTimeout),
            _ => Err(LlmError::Provider(format!("HTTP {status}: {v}"))),
        }
    }
}

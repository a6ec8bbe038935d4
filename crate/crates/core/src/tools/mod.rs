//! Tool registry and invocation protocol.
//!
//! Each specialist sees a fixed [`Registry`]. Calls are validated against
//! it, executed by a [`ToolHost`], and answered with exactly one
//! [`ToolResult`] per `call_id`.

pub mod catalog;
pub mod host;
pub mod wire;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::env::FaultKind;
use crate::role::SpecialistRole;

pub use catalog::registry_for;
pub use host::EnvToolHost;

pub const DEFAULT_MAX_RETRIES: u32 = 3;
pub const OBSERVATION_CAP: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    String,
    Integer,
    Boolean,
    Array,
    Object,
}

impl ParamKind {
    fn accepts(self, v: &Value) -> bool {
        match self {
            ParamKind::String => v.is_string(),
            ParamKind::Integer => v.is_i64() || v.is_u64(),
            ParamKind::Boolean => v.is_boolean(),
            ParamKind::Array => v.is_array(),
            ParamKind::Object => v.is_object(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSignature {
    pub name: String,
    pub params: Vec<ParamSpec>,
    pub description: String,
}

impl ToolSignature {
    pub fn new(name: &str, description: &str) -> Self {
        ToolSignature { name: name.into(), params: Vec::new(), description: description.into() }
    }

    pub fn param(mut self, name: &str, kind: ParamKind, required: bool) -> Self {
        self.params.push(ParamSpec { name: name.into(), kind, required });
        self
    }

    /// Checks required presence, unknown names and value kinds.
    pub fn check_args(&self, args: &BTreeMap<String, Value>) -> Result<(), String> {
        for p in &self.params {
            match args.get(&p.name) {
                None | Some(Value::Null) if p.required => return Err(format!("missing required argument `{}`", p.name)),
                Some(v) if !v.is_null() && !p.kind.accepts(v) => {
                    return Err(format!("argument `{}` must be {:?}", p.name, p.kind).to_lowercase())
                }
                _ => {}
            }
        }
        if let Some(extra) = args.keys().find(|k| !self.params.iter().any(|p| &p.name == *k)) {
            return Err(format!("unknown argument `{extra}`"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    #[serde(default)]
    pub args: BTreeMap<String, Value>,
    #[serde(default)]
    pub call_id: String,
}

impl ToolCall {
    pub fn new(call_id: &str, tool: &str, args: Value) -> Self {
        let args = match args {
            Value::Object(m) => m.into_iter().collect(),
            _ => BTreeMap::new(),
        };
        ToolCall { tool: tool.into(), args, call_id: call_id.into() }
    }

    pub fn str_arg(&self, name: &str) -> Option<&str> {
        self.args.get(name).and_then(Value::as_str)
    }

    pub fn int_arg(&self, name: &str) -> Option<i64> {
        self.args.get(name).and_then(Value::as_i64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FatalKind {
    UnknownTool,
    BadArgs,
    RetriesExhausted,
    JailViolation,
    PrivilegeDenied,
    ScreenError,
    HostError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "kind", rename_all = "snake_case")]
pub enum ToolStatus {
    Ok,
    RetryableError,
    FatalError(FatalKind),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub call_id: String,
    #[serde(flatten)]
    pub status: ToolStatus,
    pub observation: String,
    #[serde(default)]
    pub payload: Value,
}

impl ToolResult {
    pub fn is_ok(&self) -> bool {
        self.status == ToolStatus::Ok
    }

    /// Environment fault named in the payload, if any.
    pub fn fault(&self) -> Option<FaultKind> {
        self.payload.get("fault").and_then(|f| serde_json::from_value(f.clone()).ok())
    }

    fn fatal(call_id: &str, kind: FatalKind, msg: String) -> Self {
        ToolResult { call_id: call_id.into(), status: ToolStatus::FatalError(kind), observation: cap(&msg), payload: Value::Null }
    }
}

/// What a host reports for one invocation, before protocol framing.
#[derive(Debug, Clone, PartialEq)]
pub enum ToolOutcome {
    Ok { observation: String, payload: Value },
    Retryable { feedback: String, payload: Value },
    Fatal { kind: FatalKind, message: String },
}

/// Something that can execute validated tool calls.
pub trait ToolHost {
    fn invoke(&mut self, call: &ToolCall) -> ToolOutcome;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registry {
    pub role: SpecialistRole,
    pub tools: Vec<ToolSignature>,
}

impl Registry {
    pub fn get(&self, name: &str) -> Option<&ToolSignature> {
        self.tools.iter().find(|t| t.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.tools.iter().map(|t| t.name.as_str()).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }
}

/// Caps `s` at [`OBSERVATION_CAP`] characters with a trailing marker.
pub fn cap(s: &str) -> String {
    let n = s.chars().count();
    if n <= OBSERVATION_CAP {
        return s.to_string();
    }
    let kept: String = s.chars().take(OBSERVATION_CAP).collect();
    format!("{kept}\n[truncated {} chars]", n - OBSERVATION_CAP)
}

pub fn dispatch(registry: &Registry, host: &mut dyn ToolHost, call: &ToolCall) -> ToolResult {
    let Some(sig) = registry.get(&call.tool) else {
        return ToolResult::fatal(
            &call.call_id,
            FatalKind::UnknownTool,
            format!("unknown tool `{}` for the {} (available: {})", call.tool, registry.role, registry.names().join(", ")),
        );
    };
    if let Err(e) = sig.check_args(&call.args) {
        return ToolResult::fatal(&call.call_id, FatalKind::BadArgs, format!("{}: {e}", call.tool));
    }
    match host.invoke(call) {
        ToolOutcome::Ok { observation, payload } => {
            ToolResult { call_id: call.call_id.clone(), status: ToolStatus::Ok, observation: cap(&observation), payload }
        }
        ToolOutcome::Retryable { feedback, payload } => ToolResult {
            call_id: call.call_id.clone(),
            status: ToolStatus::RetryableError,
            observation: cap(&feedback),
            payload,
        },
        ToolOutcome::Fatal { kind, message } => ToolResult::fatal(&call.call_id, kind, message),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub call_id: String,
    pub tool: String,
    pub attempt: u32,
    #[serde(flatten)]
    pub status: ToolStatus,
}

/// Dispatches `call`, re-dispatching on `RetryableError` for at most
/// `max_retries` attempts in total. A retryable error on the last attempt
/// becomes `FatalError(RetriesExhausted)`.
pub fn retry_loop(
    registry: &Registry,
    host: &mut dyn ToolHost,
    call: &ToolCall,
    max_retries: u32,
    log: &mut Vec<AttemptRecord>,
) -> ToolResult {
    let max = max_retries.max(1);
    let mut attempt = 0;
    loop {
        attempt += 1;
        let mut r = dispatch(registry, host, call);
        log.push(AttemptRecord { call_id: call.call_id.clone(), tool: call.tool.clone(), attempt, status: r.status });
        match r.status {
            ToolStatus::RetryableError if attempt < max => continue,
            ToolStatus::RetryableError => {
                r.status = ToolStatus::FatalError(FatalKind::RetriesExhausted);
                r.observation = cap(&format!("giving up after {attempt} attempts: {}", r.observation));
                return r;
            }
            _ => return r,
        }
    }
}

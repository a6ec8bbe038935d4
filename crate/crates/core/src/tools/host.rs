//! Environment tools for the Infrastructure Manager and Investigator.

use serde_json::{json, Value};

use super::{FatalKind, ToolCall, ToolHost, ToolOutcome};
use crate::env::{
    diff, Attachment, EnvError, EnvSnapshot, Environment, FaultKind, ProbeDomain, ProbeQuery, SendRequest,
};

pub struct EnvToolHost<'a> {
    env: &'a mut Environment,
    baseline: Option<EnvSnapshot>,
}

impl<'a> EnvToolHost<'a> {
    pub fn new(env: &'a mut Environment) -> Self {
        EnvToolHost { env, baseline: None }
    }

    /// Snapshot that `env_diff` compares against.
    pub fn with_baseline(env: &'a mut Environment, baseline: EnvSnapshot) -> Self {
        EnvToolHost { env, baseline: Some(baseline) }
    }

    pub fn env(&mut self) -> &mut Environment {
        self.env
    }
}

fn env_error(e: EnvError) -> ToolOutcome {
    match e {
        EnvError::Fault(k) => fault_outcome(k, &format!("{k} in effect; the operation did not happen")),
        EnvError::JailViolation(p) => ToolOutcome::Fatal {
            kind: FatalKind::JailViolation,
            message: format!("path escapes /home/user: {p}"),
        },
        EnvError::PrivilegeDenied(c) => ToolOutcome::Fatal {
            kind: FatalKind::PrivilegeDenied,
            message: format!("privileged commands are not available: {c}"),
        },
        EnvError::InvalidRequest(m) => ToolOutcome::Fatal { kind: FatalKind::BadArgs, message: m },
        EnvError::Io(m) => ToolOutcome::Fatal { kind: FatalKind::HostError, message: m },
    }
}

fn fault_outcome(k: FaultKind, feedback: &str) -> ToolOutcome {
    ToolOutcome::Retryable { feedback: feedback.into(), payload: json!({ "fault": k }) }
}

fn attachments(v: Option<&Value>) -> Result<Vec<Attachment>, String> {
    let Some(Value::Array(items)) = v else {
        return Ok(Vec::new());
    };
    items
        .iter()
        .map(|a| match a {
            Value::String(name) => Ok(Attachment { name: name.clone(), content: String::new() }),
            other => serde_json::from_value(other.clone()).map_err(|e| format!("attachment: {e}")),
        })
        .collect()
}

impl ToolHost for EnvToolHost<'_> {
    fn invoke(&mut self, call: &ToolCall) -> ToolOutcome {
        match call.tool.as_str() {
            "send_email" => {
                let atts = match attachments(call.args.get("attachments")) {
                    Ok(a) => a,
                    Err(m) => return ToolOutcome::Fatal { kind: FatalKind::BadArgs, message: m },
                };
                let req = SendRequest {
                    to: call.str_arg("to").unwrap_or_default().into(),
                    subject: call.str_arg("subject").unwrap_or_default().into(),
                    body: call.str_arg("body").unwrap_or_default().into(),
                    attachments: atts,
                    sender_name: call.str_arg("sender_name").map(String::from),
                };
                match self.env.send_email(&req) {
                    Ok(r) => ToolOutcome::Ok {
                        observation: format!("sent, message_id={}", r.message_id),
                        payload: json!(r),
                    },
                    Err(e) => env_error(e),
                }
            }
            "exec_command" => match self.env.exec_command(call.str_arg("cmdline").unwrap_or_default()) {
                Ok(r) if r.fault == Some(FaultKind::StorageFull) => {
                    fault_outcome(FaultKind::StorageFull, &format!("exit {}: {}", r.exit_code, r.stderr.trim_end()))
                }
                Ok(r) => {
                    let mut obs = format!("exit {}", r.exit_code);
                    if !r.stdout.is_empty() {
                        obs.push_str(&format!("\nstdout:\n{}", r.stdout));
                    }
                    if !r.stderr.is_empty() {
                        obs.push_str(&format!("\nstderr:\n{}", r.stderr));
                    }
                    ToolOutcome::Ok { observation: obs, payload: json!(r) }
                }
                Err(e) => env_error(e),
            },
            "probe" => {
                let domain = match call.str_arg("domain").unwrap_or_default() {
                    "fs" => ProbeDomain::Fs,
                    "mail" => ProbeDomain::Mail,
                    "record" => ProbeDomain::Record,
                    d => {
                        return ToolOutcome::Fatal {
                            kind: FatalKind::BadArgs,
                            message: format!("unknown probe domain `{d}` (fs, mail, record)"),
                        }
                    }
                };
                let q = ProbeQuery { domain, selector: call.str_arg("selector").unwrap_or_default().into() };
                match self.env.probe(&q) {
                    Ok(s) => ToolOutcome::Ok { observation: s.render(), payload: json!({ "query": q, "result": s }) },
                    Err(e) => env_error(e),
                }
            }
            "env_diff" => {
                let base = self.baseline.clone().unwrap_or_default();
                let d = diff(&base, &self.env.snapshot());
                let obs = if d.is_empty() {
                    "no changes".to_string()
                } else {
                    format!("added: {:?}\nremoved: {:?}\nmodified: {:?}", d.added, d.removed, d.modified)
                };
                ToolOutcome::Ok { observation: obs, payload: json!(d) }
            }
            other => ToolOutcome::Fatal { kind: FatalKind::UnknownTool, message: format!("no handler for `{other}`") },
        }
    }
}

//! The virtual user environment a test runs against.
//!
//! A jailed home directory, a stub mailbox, fault injection and read-only
//! probing. Test tooling reaches it through three calls (`send_email`,
//! `exec_command`, `probe`); the subject agent gets its own shell and mail
//! client that ignore API-level faults.

pub mod http;
pub mod mail;
pub mod sandbox;
pub mod shell;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use mail::{Attachment, EmailMessage, EmailStore, LogicalClock, Receipt, SendRequest};
pub use sandbox::{EntryKind, JailPath, Sandbox};

pub const DEFAULT_QUOTA: u64 = 64 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnvError {
    #[error("path escapes the home directory: {0}")]
    JailViolation(String),
    #[error("privileged operation refused: {0}")]
    PrivilegeDenied(String),
    #[error("{0} in effect")]
    Fault(FaultKind),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl EnvError {
    /// Faults clear on their own; everything else is permanent.
    pub fn is_retryable(&self) -> bool {
        matches!(self, EnvError::Fault(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultKind {
    NetworkDown,
    StorageFull,
    ApiTimeout,
}

impl std::fmt::Display for FaultKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FaultKind::NetworkDown => "NetworkDown",
            FaultKind::StorageFull => "StorageFull",
            FaultKind::ApiTimeout => "ApiTimeout",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultTrigger {
    /// Affects the next `n` matching operations.
    Count(u32),
    /// Active for this many logical seconds after injection.
    Duration(i64),
    Persistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub trigger: FaultTrigger,
}

impl FaultSpec {
    pub fn persistent(kind: FaultKind) -> Self {
        FaultSpec { kind, trigger: FaultTrigger::Persistent }
    }

    pub fn count(kind: FaultKind, n: u32) -> Self {
        FaultSpec { kind, trigger: FaultTrigger::Count(n) }
    }
}

/// Operation classes faults are scoped to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiOp {
    SendEmail,
    Exec,
    Probe,
}

impl FaultKind {
    pub fn affects(self, op: ApiOp) -> bool {
        match self {
            FaultKind::NetworkDown => op == ApiOp::SendEmail,
            FaultKind::ApiTimeout => true,
            // storage only bites on writes, which happen inside exec
            FaultKind::StorageFull => op == ApiOp::Exec,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ActiveFault {
    spec: FaultSpec,
    injected_at: i64,
    remaining: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSet {
    active: Vec<ActiveFault>,
}

impl FaultSet {
    fn live(&self, now: i64) -> impl Iterator<Item = (usize, &ActiveFault)> {
        self.active.iter().enumerate().filter(move |(_, f)| match f.spec.trigger {
            FaultTrigger::Count(_) => f.remaining.unwrap_or(0) > 0,
            FaultTrigger::Duration(d) => now < f.injected_at + d,
            FaultTrigger::Persistent => true,
        })
    }

    pub fn is_active(&self, kind: FaultKind, now: i64) -> bool {
        self.live(now).any(|(_, f)| f.spec.kind == kind)
    }

    pub fn kinds(&self, now: i64) -> Vec<FaultKind> {
        let mut k: Vec<FaultKind> = self.live(now).map(|(_, f)| f.spec.kind).collect();
        k.sort();
        k.dedup();
        k
    }

    /// First live fault of `kind` hitting `op`, consuming one count.
    fn fire(&mut self, op: ApiOp, only: Option<FaultKind>, now: i64) -> Option<FaultKind> {
        let idx = self
            .live(now)
            .find(|(_, f)| f.spec.kind.affects(op) && only.is_none_or(|k| k == f.spec.kind))
            .map(|(i, _)| i)?;
        let f = &mut self.active[idx];
        if let Some(r) = f.remaining.as_mut() {
            *r -= 1;
        }
        Some(f.spec.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultEvent {
    pub at: String,
    pub kind: FaultKind,
    /// "injected" or the operation it hit.
    pub event: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeDomain {
    Fs,
    Mail,
    /// Structured records kept by applications; the stub keeps none.
    Record,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProbeQuery {
    pub domain: ProbeDomain,
    pub selector: String,
}

impl ProbeQuery {
    pub fn fs(path: &str) -> Self {
        ProbeQuery { domain: ProbeDomain::Fs, selector: path.into() }
    }

    pub fn mail(selector: &str) -> Self {
        ProbeQuery { domain: ProbeDomain::Mail, selector: selector.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeEntity {
    pub key: String,
    pub hash: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EnvStatus {
    Empty,
    Found { entities: Vec<ProbeEntity> },
}

impl EnvStatus {
    pub fn is_empty(&self) -> bool {
        matches!(self, EnvStatus::Empty)
    }

    pub fn entities(&self) -> &[ProbeEntity] {
        match self {
            EnvStatus::Empty => &[],
            EnvStatus::Found { entities } => entities,
        }
    }

    pub fn render(&self) -> String {
        match self {
            EnvStatus::Empty => "(empty)".into(),
            EnvStatus::Found { entities } => entities
                .iter()
                .map(|e| if e.content.is_empty() { format!("== {}\n", e.key) } else { format!("== {}\n{}\n", e.key, e.content) })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvSnapshot {
    pub entities: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvDiff {
    pub added: Vec<String>,
    pub removed: Vec<String>,
    pub modified: Vec<String>,
}

impl EnvDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.modified.is_empty()
    }

    pub fn len(&self) -> usize {
        self.added.len() + self.removed.len() + self.modified.len()
    }

    pub fn swap(&self) -> EnvDiff {
        EnvDiff { added: self.removed.clone(), removed: self.added.clone(), modified: self.modified.clone() }
    }
}

pub fn diff(a: &EnvSnapshot, b: &EnvSnapshot) -> EnvDiff {
    let mut d = EnvDiff::default();
    for (k, h) in &b.entities {
        match a.entities.get(k) {
            None => d.added.push(k.clone()),
            Some(old) if old != h => d.modified.push(k.clone()),
            _ => {}
        }
    }
    d.removed = a.entities.keys().filter(|k| !b.entities.contains_key(*k)).cloned().collect();
    d
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CmdResult {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
    /// Set when a fault shaped the outcome.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<FaultKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub quota: u64,
    pub seed: u64,
    /// RFC 3339 start of the logical clock.
    pub clock_start: Option<String>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig { quota: DEFAULT_QUOTA, seed: 0, clock_start: None }
    }
}

pub struct Environment {
    pub sandbox: Sandbox,
    pub mail: EmailStore,
    pub clock: LogicalClock,
    faults: FaultSet,
    fault_log: Vec<FaultEvent>,
    start: i64,
}

impl std::fmt::Debug for Environment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Environment").field("root", &self.sandbox.real_root()).finish_non_exhaustive()
    }
}

impl Environment {
    pub fn new(cfg: &EnvConfig) -> Result<Self, EnvError> {
        let sandbox = Sandbox::temporary(cfg.quota).map_err(|e| EnvError::Io(e.to_string()))?;
        let clock = match &cfg.clock_start {
            Some(s) => LogicalClock::starting_at(
                chrono::DateTime::parse_from_rfc3339(s)
                    .map_err(|e| EnvError::InvalidRequest(format!("clock_start: {e}")))?
                    .with_timezone(&chrono::Utc),
            ),
            None => LogicalClock::default(),
        };
        let start = clock.now().timestamp();
        Ok(Environment {
            sandbox,
            mail: EmailStore::new(cfg.seed),
            clock,
            faults: FaultSet::default(),
            fault_log: Vec::new(),
            start,
        })
    }

    /// Logical seconds since the environment was created.
    pub fn elapsed(&self) -> i64 {
        self.clock.now().timestamp() - self.start
    }

    pub fn inject_fault(&mut self, spec: FaultSpec) {
        let remaining = match spec.trigger {
            FaultTrigger::Count(n) => Some(n),
            _ => None,
        };
        self.faults.active.push(ActiveFault { spec, injected_at: self.elapsed(), remaining });
        self.log_fault(spec.kind, "injected");
    }

    pub fn active_faults(&self) -> Vec<FaultKind> {
        self.faults.kinds(self.elapsed())
    }

    pub fn fault_log(&self) -> &[FaultEvent] {
        &self.fault_log
    }

    fn log_fault(&mut self, kind: FaultKind, event: &str) {
        self.fault_log.push(FaultEvent { at: self.clock.now().to_rfc3339(), kind, event: event.into() });
    }

    fn gate(&mut self, op: ApiOp, only: Option<FaultKind>) -> Result<(), EnvError> {
        let now = self.elapsed();
        if let Some(k) = self.faults.fire(op, only, now) {
            let name = serde_json::to_value(op).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            self.log_fault(k, &name);
            return Err(EnvError::Fault(k));
        }
        Ok(())
    }

    pub fn send_email(&mut self, req: &SendRequest) -> Result<Receipt, EnvError> {
        self.clock.tick();
        if req.to.trim().is_empty() {
            return Err(EnvError::InvalidRequest("recipient must not be empty".into()));
        }
        self.gate(ApiOp::SendEmail, None)?;
        let now = self.clock.now();
        self.mail.send_email(req, now).map_err(|e| EnvError::InvalidRequest(e.to_string()))
    }

    /// Runs `cmdline` from the home directory on behalf of test tooling.
    pub fn exec_command(&mut self, cmdline: &str) -> Result<CmdResult, EnvError> {
        self.clock.tick();
        if cmdline.trim().is_empty() {
            return Err(EnvError::InvalidRequest("empty command line".into()));
        }
        self.gate(ApiOp::Exec, Some(FaultKind::ApiTimeout))?;
        let (r, _) = self.run_shell(JailPath::root(), cmdline)?;
        Ok(r)
    }

    /// Subject-agent shell: API faults do not apply, storage limits do, and
    /// refusals come back as ordinary command failures.
    pub fn subject_exec(&mut self, cwd: &JailPath, cmdline: &str) -> (CmdResult, JailPath) {
        self.clock.tick();
        match self.run_shell(cwd.clone(), cmdline) {
            Ok(r) => r,
            Err(e) => (
                CmdResult { exit_code: 1, stdout: String::new(), stderr: format!("{e}: Permission denied\n"), fault: None },
                cwd.clone(),
            ),
        }
    }

    fn run_shell(&mut self, cwd: JailPath, cmdline: &str) -> Result<(CmdResult, JailPath), EnvError> {
        let storage_full = self.faults.is_active(FaultKind::StorageFull, self.elapsed());
        let mut sh = shell::Shell::new(&self.sandbox, cwd);
        sh.storage_full = storage_full;
        let out = sh.run(cmdline)?;
        let blocked = sh.write_blocked;
        let cwd = sh.cwd.clone();
        let fault = if blocked && storage_full {
            self.gate(ApiOp::Exec, Some(FaultKind::StorageFull)).err().map(|_| FaultKind::StorageFull)
        } else {
            None
        };
        Ok((CmdResult { exit_code: out.code, stdout: out.stdout, stderr: out.stderr, fault }, cwd))
    }

    /// Read-only inspection. Unknown selectors yield `Empty`.
    pub fn probe(&mut self, q: &ProbeQuery) -> Result<EnvStatus, EnvError> {
        self.clock.tick();
        self.gate(ApiOp::Probe, None)?;
        Ok(self.peek(q))
    }

    /// Probe without the API gate or clock tick.
    pub fn peek(&self, q: &ProbeQuery) -> EnvStatus {
        let entities = match q.domain {
            ProbeDomain::Fs => self.probe_fs(&q.selector),
            ProbeDomain::Mail => self.probe_mail(&q.selector),
            ProbeDomain::Record => Vec::new(),
        };
        if entities.is_empty() {
            EnvStatus::Empty
        } else {
            EnvStatus::Found { entities }
        }
    }

    fn probe_fs(&self, selector: &str) -> Vec<ProbeEntity> {
        let Ok(p) = self.sandbox.resolve(&JailPath::root(), selector) else {
            return Vec::new();
        };
        let Some(kind) = self.sandbox.kind(&p) else {
            return Vec::new();
        };
        let mut items = vec![(p.clone(), kind)];
        if kind == EntryKind::Dir {
            items.extend(self.sandbox.walk(&p));
        }
        items.into_iter().map(|(p, k)| self.fs_entity(&p, k)).collect()
    }

    fn fs_entity(&self, p: &JailPath, k: EntryKind) -> ProbeEntity {
        match k {
            EntryKind::Dir => ProbeEntity { key: format!("fs:{}", p.display()), hash: "dir".into(), content: String::new() },
            EntryKind::File => {
                let data = self.sandbox.read(p).unwrap_or_default();
                ProbeEntity {
                    key: format!("fs:{}", p.display()),
                    hash: sha256_hex(&data),
                    content: String::from_utf8_lossy(&data).into_owned(),
                }
            }
        }
    }

    fn probe_mail(&self, selector: &str) -> Vec<ProbeEntity> {
        let (folder, needle) = match selector.split_once('/') {
            Some((f, n)) => (f, Some(n)),
            None => (selector, None),
        };
        let msgs: Vec<(&str, &EmailMessage)> = match (folder, needle) {
            ("inbox", None) => self.mail.inbox.iter().map(|m| ("inbox", m)).collect(),
            ("sent", None) => self.mail.sent.iter().map(|m| ("sent", m)).collect(),
            ("inbox", Some(n)) => self.mail.inbox.iter().filter(|m| needle_hit(m, n)).map(|m| ("inbox", m)).collect(),
            ("sent", Some(n)) => self.mail.sent.iter().filter(|m| needle_hit(m, n)).map(|m| ("sent", m)).collect(),
            ("thread", Some(n)) => self
                .mail
                .thread(n)
                .into_iter()
                .map(|m| (if self.mail.sent.iter().any(|s| s.id == m.id) { "sent" } else { "inbox" }, m))
                .collect(),
            _ => Vec::new(),
        };
        msgs.into_iter()
            .map(|(f, m)| ProbeEntity { key: format!("mail:{f}/{}", m.id), hash: mail_hash(m), content: m.render() })
            .collect()
    }

    pub fn snapshot(&self) -> EnvSnapshot {
        let mut entities = BTreeMap::new();
        for (p, k) in self.sandbox.walk(&JailPath::root()) {
            let e = self.fs_entity(&p, k);
            entities.insert(e.key, e.hash);
        }
        for (f, list) in [("inbox", &self.mail.inbox), ("sent", &self.mail.sent)] {
            for m in list {
                entities.insert(format!("mail:{f}/{}", m.id), mail_hash(m));
            }
        }
        EnvSnapshot { entities }
    }
}

fn needle_hit(m: &EmailMessage, n: &str) -> bool {
    let n = n.to_lowercase();
    m.id == n
        || m.subject.to_lowercase().contains(&n)
        || m.body.to_lowercase().contains(&n)
        || m.from.to_lowercase().contains(&n)
        || m.to.to_lowercase().contains(&n)
}

fn mail_hash(m: &EmailMessage) -> String {
    sha256_hex(serde_json::to_string(m).unwrap_or_default().as_bytes())
}

//! In-memory mailbox with a deliberately narrow API.
//!
//! Test tooling can only append a fresh message to the inbox, always from
//! the store's fixed domain and always stamped by the store's clock. The
//! subject agent gets a client-side view that can reply and compose into
//! the sent folder.

use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_DOMAIN: &str = "aibrilliance.online";
pub const USER_ADDRESS: &str = "user@aibrilliance.online";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    pub name: String,
    #[serde(default)]
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmailMessage {
    pub id: String,
    pub from: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sender_name: Option<String>,
    pub to: String,
    pub subject: String,
    pub body: String,
    /// RFC 3339, assigned by the store.
    pub date: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attachments: Vec<Attachment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_reply_to: Option<String>,
}

impl EmailMessage {
    /// Plain-text rendering used by probes and the mock mail client.
    pub fn render(&self) -> String {
        let from = match &self.sender_name {
            Some(n) => format!("{n} <{}>", self.from),
            None => self.from.clone(),
        };
        let mut s = format!(
            "From: {from}\nTo: {}\nDate: {}\nSubject: {}\n\n{}\n",
            self.to, self.date, self.subject, self.body
        );
        for a in &self.attachments {
            s.push_str(&format!("[attachment: {}]\n", a.name));
        }
        s
    }
}

/// Body of a send request. Fields outside this shape, such as a
/// caller-chosen timestamp or sender domain, are ignored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SendRequest {
    pub to: String,
    #[serde(default)]
    pub subject: String,
    #[serde(default)]
    pub body: String,
    #[serde(default)]
    pub attachments: Vec<Attachment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sender_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub message_id: String,
}

/// Store clock: starts at a configured instant and moves forward only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicalClock {
    now: DateTime<Utc>,
}

impl Default for LogicalClock {
    fn default() -> Self {
        LogicalClock { now: Utc.with_ymd_and_hms(2025, 5, 12, 17, 10, 0).unwrap() }
    }
}

impl LogicalClock {
    pub fn starting_at(now: DateTime<Utc>) -> Self {
        LogicalClock { now }
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.now
    }

    pub fn advance(&mut self, secs: i64) {
        self.now += Duration::seconds(secs.max(0));
    }

    pub fn tick(&mut self) -> DateTime<Utc> {
        self.advance(1);
        self.now
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MailError {
    #[error("recipient must not be empty")]
    EmptyRecipient,
    #[error("no message with id {0}")]
    UnknownMessage(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmailStore {
    pub inbox: Vec<EmailMessage>,
    pub sent: Vec<EmailMessage>,
    pub fixed_sender_domain: String,
    #[serde(skip, default = "default_rng")]
    rng: ChaCha8Rng,
}

fn default_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

impl PartialEq for EmailStore {
    fn eq(&self, other: &Self) -> bool {
        self.inbox == other.inbox && self.sent == other.sent && self.fixed_sender_domain == other.fixed_sender_domain
    }
}

impl EmailStore {
    pub fn new(seed: u64) -> Self {
        EmailStore {
            inbox: Vec::new(),
            sent: Vec::new(),
            fixed_sender_domain: DEFAULT_DOMAIN.into(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn next_id(&mut self) -> String {
        format!("m-{:012x}", self.rng.gen::<u64>() & 0xffff_ffff_ffff)
    }

    fn sender_address(&self, name: Option<&str>) -> String {
        let local: String = name
            .unwrap_or("notifications")
            .split_whitespace()
            .map(|w| w.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect::<Vec<_>>()
            .join(".");
        let local = if local.is_empty() { "notifications".to_string() } else { local };
        format!("{local}@{}", self.fixed_sender_domain)
    }

    /// The one mutation available to test tooling: a fresh inbox message.
    pub fn send_email(&mut self, req: &SendRequest, now: DateTime<Utc>) -> Result<Receipt, MailError> {
        if req.to.trim().is_empty() {
            return Err(MailError::EmptyRecipient);
        }
        let id = self.next_id();
        let msg = EmailMessage {
            id: id.clone(),
            from: self.sender_address(req.sender_name.as_deref()),
            sender_name: req.sender_name.clone(),
            to: req.to.clone(),
            subject: req.subject.clone(),
            body: req.body.clone(),
            date: now.to_rfc3339(),
            attachments: req.attachments.clone(),
            in_reply_to: None,
        };
        self.inbox.push(msg);
        Ok(Receipt { message_id: id })
    }

    /// Subject-side reply to an inbox message.
    pub fn reply(&mut self, to_id: &str, body: &str, now: DateTime<Utc>) -> Result<Receipt, MailError> {
        let orig = self
            .inbox
            .iter()
            .find(|m| m.id == to_id)
            .ok_or_else(|| MailError::UnknownMessage(to_id.to_string()))?
            .clone();
        let subject = if orig.subject.starts_with("Re:") { orig.subject.clone() } else { format!("Re: {}", orig.subject) };
        let id = self.next_id();
        self.sent.push(EmailMessage {
            id: id.clone(),
            from: USER_ADDRESS.into(),
            sender_name: None,
            to: orig.from,
            subject,
            body: body.to_string(),
            date: now.to_rfc3339(),
            attachments: Vec::new(),
            in_reply_to: Some(orig.id),
        });
        Ok(Receipt { message_id: id })
    }

    /// Subject-side new message.
    pub fn compose(&mut self, to: &str, subject: &str, body: &str, now: DateTime<Utc>) -> Result<Receipt, MailError> {
        if to.trim().is_empty() {
            return Err(MailError::EmptyRecipient);
        }
        let id = self.next_id();
        self.sent.push(EmailMessage {
            id: id.clone(),
            from: USER_ADDRESS.into(),
            sender_name: None,
            to: to.to_string(),
            subject: subject.to_string(),
            body: body.to_string(),
            date: now.to_rfc3339(),
            attachments: Vec::new(),
            in_reply_to: None,
        });
        Ok(Receipt { message_id: id })
    }

    pub fn find_inbox(&self, needle: &str) -> Option<&EmailMessage> {
        self.inbox.iter().rev().find(|m| matches_needle(m, needle))
    }

    /// Inbox messages matching `needle` plus every sent message replying to
    /// one of them or sharing the subject.
    pub fn thread(&self, needle: &str) -> Vec<&EmailMessage> {
        let roots: Vec<&EmailMessage> = self.inbox.iter().filter(|m| matches_needle(m, needle)).collect();
        let mut out = roots.clone();
        for m in &self.sent {
            let replies = m.in_reply_to.as_ref().is_some_and(|r| roots.iter().any(|root| &root.id == r));
            if replies || matches_needle(m, needle) {
                out.push(m);
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)
    }

    pub fn load(path: &Path, seed: u64) -> std::io::Result<Self> {
        let mut s: EmailStore = serde_json::from_slice(&std::fs::read(path)?)?;
        s.rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(s)
    }
}

fn matches_needle(m: &EmailMessage, needle: &str) -> bool {
    let n = needle.to_lowercase();
    m.id == needle
        || m.subject.to_lowercase().contains(&n)
        || m.from.to_lowercase().contains(&n)
        || m.sender_name.as_deref().is_some_and(|s| s.to_lowercase().contains(&n))
}

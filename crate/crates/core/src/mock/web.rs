//! Web-mail style mock agent: inbox and sent lists with an assistant box.
//!
//! The ask field starts unfocused; clicking its label or the field focuses it.
//! Enter or clicking `[Send]` submits.

use regex::Regex;

use super::{Action, BugBehavior, MockKind, Runner, SubjectAgent};
use crate::env::{Environment, JailPath};
use crate::ui::{InputField, UiEvent, VirtualTerminal};

pub const ASK_FIELD: &str = "ask";
pub const ASK_LABEL: &str = "Ask the assistant:";
pub const SEND_BUTTON: &str = "[Send]";

const LIST_ROWS: usize = 10;

pub struct MockWebForm {
    runner: Runner,
    started: bool,
}

impl MockWebForm {
    pub(super) fn new(triggers: Vec<(Regex, Vec<Action>)>, bugs: Vec<BugBehavior>) -> Self {
        MockWebForm { runner: Runner::new(triggers, bugs, JailPath::root()), started: false }
    }

    fn draw(&self, term: &mut VirtualTerminal, env: &Environment) {
        let rows = term.rows();
        let cols = term.cols();
        term.clear();
        term.write_at(0, 0, &format!("Mail  |  {}", crate::env::mail::USER_ADDRESS));
        term.write_at(1, 0, &"-".repeat(cols));
        term.write_at(2, 0, &format!("Inbox ({})", env.mail.inbox.len()));
        for (i, m) in env.mail.inbox.iter().rev().take(LIST_ROWS).enumerate() {
            let from = m.sender_name.clone().unwrap_or_else(|| m.from.clone());
            term.write_at(3 + i, 2, &format!("From: {from}  Subject: {}  {}", m.subject, short_time(&m.date)));
        }
        let sent_top = 4 + LIST_ROWS;
        term.write_at(sent_top, 0, &format!("Sent ({})", env.mail.sent.len()));
        for (i, m) in env.mail.sent.iter().rev().take(LIST_ROWS).enumerate() {
            term.write_at(sent_top + 1 + i, 2, &format!("To: {}  Subject: {}  {}", m.to, m.subject, short_time(&m.date)));
        }
        let log_top = sent_top + LIST_ROWS + 2;
        term.write_at(log_top - 1, 0, &"-".repeat(cols));
        term.write_at(log_top, 0, "Assistant");
        term.write_log(log_top + 1, rows - 2, &self.runner.log);
        term.write_at(rows - 2, 0, &self.runner.status());
        term.write_at(rows - 1, 0, ASK_LABEL);
        term.write_at(rows - 1, cols - SEND_BUTTON.len() - 2, SEND_BUTTON);
    }
}

fn short_time(rfc3339: &str) -> String {
    chrono::DateTime::parse_from_rfc3339(rfc3339).map(|d| d.format("%b %d %H:%M").to_string()).unwrap_or_default()
}

impl SubjectAgent for MockWebForm {
    fn kind(&self) -> MockKind {
        MockKind::MockWebForm
    }

    fn step(&mut self, term: &mut VirtualTerminal, env: &mut Environment, now: f64) {
        if !self.started {
            self.started = true;
            let row = term.rows() - 1;
            let width = term.cols() - ASK_LABEL.len() - SEND_BUTTON.len() - 5;
            term.ensure_field(
                InputField::new(ASK_FIELD, row, ASK_LABEL.len() + 2, width).with_label(row, 0, ASK_LABEL.len()),
            );
        }
        for ev in term.take_events() {
            let submit = match ev {
                UiEvent::Key { key, field } => key == "Enter" && field.as_deref() == Some(ASK_FIELD),
                UiEvent::Click { text, .. } => text.contains(SEND_BUTTON),
            };
            if submit && !self.runner.busy() {
                let prompt = term.field_value(ASK_FIELD).unwrap_or_default().trim().to_string();
                if !prompt.is_empty() {
                    term.set_field_value(ASK_FIELD, "");
                    self.runner.submit(&prompt, now);
                }
            }
        }
        self.runner.advance(env, now);
        self.draw(term, env);
    }

    fn busy(&self) -> bool {
        self.runner.busy()
    }

    fn prompts(&self) -> &[String] {
        &self.runner.prompts
    }
}

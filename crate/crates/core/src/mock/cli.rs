//! Terminal-style mock agent: a scrolling log above a `> ` prompt line.

use regex::Regex;

use super::{Action, BugBehavior, MockKind, Runner, SubjectAgent};
use crate::env::{Environment, JailPath};
use crate::ui::{InputField, UiEvent, VirtualTerminal};

pub const PROMPT_FIELD: &str = "prompt";

pub struct MockCli {
    runner: Runner,
    started: bool,
}

impl MockCli {
    pub(super) fn new(triggers: Vec<(Regex, Vec<Action>)>, bugs: Vec<BugBehavior>) -> Self {
        MockCli { runner: Runner::new(triggers, bugs, JailPath::root().join("work")), started: false }
    }

    fn draw(&self, term: &mut VirtualTerminal) {
        let rows = term.rows();
        let cols = term.cols();
        term.clear();
        term.write_at(0, 0, &format!("mock-cli assistant  (cwd: {})", self.runner.cwd.display()));
        term.write_at(1, 0, &"-".repeat(cols));
        term.write_log(2, rows - 2, &self.runner.log);
        term.write_at(rows - 2, 0, &self.runner.status());
        term.write_at(rows - 1, 0, ">");
    }
}

impl SubjectAgent for MockCli {
    fn kind(&self) -> MockKind {
        MockKind::MockCli
    }

    fn step(&mut self, term: &mut VirtualTerminal, env: &mut Environment, now: f64) {
        if !self.started {
            self.started = true;
            if env.sandbox.kind(&self.runner.cwd).is_none() {
                self.runner.cwd = JailPath::root();
            }
            let row = term.rows() - 1;
            term.ensure_field(InputField::new(PROMPT_FIELD, row, 2, term.cols() - 3).with_max_len(4096));
            term.set_focus(Some(PROMPT_FIELD));
        }
        for ev in term.take_events() {
            if let UiEvent::Key { key, field } = ev {
                if key == "Enter" && field.as_deref() == Some(PROMPT_FIELD) && !self.runner.busy() {
                    let prompt = term.field_value(PROMPT_FIELD).unwrap_or_default().trim().to_string();
                    if !prompt.is_empty() {
                        term.set_field_value(PROMPT_FIELD, "");
                        self.runner.submit(&prompt, now);
                    }
                }
            }
        }
        self.runner.advance(env, now);
        self.draw(term);
    }

    fn busy(&self) -> bool {
        self.runner.busy()
    }

    fn prompts(&self) -> &[String] {
        &self.runner.prompts
    }
}

//! Scriptable stand-in subject agents.
//!
//! A mock agent draws its interface on the virtual terminal, reads prompts
//! only from what is on screen, and acts on the environment through the
//! same jailed shell and mail client a real agent would use. Bug behaviours
//! rewrite the scripted actions before they run.

pub mod cli;
pub mod web;

use std::collections::VecDeque;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, JailPath};
use crate::pipeline::BugCriterion;
use crate::ui::{Screen, VirtualTerminal};

pub use cli::MockCli;
pub use web::MockWebForm;

pub const COMPLETION_MARKER: &str = "[finished]";
pub const NOT_UNDERSTOOD: &str = "I don't understand that request.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplyAction {
    /// Text identifying the inbox message to answer.
    pub thread: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposeAction {
    pub to: String,
    pub subject: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<String>,
}

/// One scripted step. Bodies may embed `{file:PATH}` to inline a file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Say(String),
    Run(String),
    Reply(ReplyAction),
    Compose(ComposeAction),
    /// Busy for this many seconds, with a spinner.
    Sleep(u32),
    Done,
}

impl Action {
    fn is_effectful(&self) -> bool {
        matches!(self, Action::Run(_) | Action::Reply(_) | Action::Compose(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BugBehavior {
    /// Uses home-absolute `~/` paths where the task needs `./`.
    WrongPathBackup,
    /// Leaves "[your name]" as the email signature.
    PlaceholderSignoff,
    /// Reports success without acting.
    MisreportSuccess,
    /// Performs only the first half of the effectful steps.
    SilentPartial,
}

impl BugBehavior {
    pub fn criterion(self) -> BugCriterion {
        match self {
            BugBehavior::WrongPathBackup | BugBehavior::SilentPartial => BugCriterion::CompletionImpact,
            BugBehavior::PlaceholderSignoff => BugCriterion::QualityImpact,
            BugBehavior::MisreportSuccess => BugCriterion::Misreporting,
        }
    }

    fn apply(self, actions: Vec<Action>) -> Vec<Action> {
        match self {
            BugBehavior::WrongPathBackup => actions
                .into_iter()
                .map(|a| match a {
                    Action::Run(c) => Action::Run(c.replace("./", "~/")),
                    other => other,
                })
                .collect(),
            BugBehavior::PlaceholderSignoff => actions
                .into_iter()
                .map(|a| match a {
                    Action::Reply(r) => Action::Reply(ReplyAction { signature: Some("[your name]".into()), ..r }),
                    Action::Compose(c) => Action::Compose(ComposeAction { signature: Some("[your name]".into()), ..c }),
                    other => other,
                })
                .collect(),
            BugBehavior::MisreportSuccess => actions.into_iter().filter(|a| !a.is_effectful()).collect(),
            BugBehavior::SilentPartial => {
                let keep = actions.iter().filter(|a| a.is_effectful()).count() / 2;
                let mut seen = 0;
                actions
                    .into_iter()
                    .filter(|a| {
                        if a.is_effectful() {
                            seen += 1;
                            seen <= keep
                        } else {
                            true
                        }
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trigger {
    /// Regular expression matched against the prompt.
    pub pattern: String,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorScript {
    pub triggers: Vec<Trigger>,
    #[serde(default)]
    pub bugs: Vec<BugBehavior>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpawnError {
    #[error("screen unavailable: {0}")]
    ScreenUnavailable(String),
    #[error("bad trigger pattern `{pattern}`: {reason}")]
    BadPattern { pattern: String, reason: String },
}

impl BehaviorScript {
    pub fn with_bugs(mut self, bugs: &[BugBehavior]) -> Self {
        self.bugs = bugs.to_vec();
        self
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    fn compile(&self) -> Result<Vec<(Regex, Vec<Action>)>, SpawnError> {
        self.triggers
            .iter()
            .map(|t| {
                Regex::new(&t.pattern)
                    .map(|r| (r, t.actions.clone()))
                    .map_err(|e| SpawnError::BadPattern { pattern: t.pattern.clone(), reason: e.to_string() })
            })
            .collect()
    }

    /// Actions for `prompt`: the first matching trigger wins, with bugs applied.
    pub fn plan(&self, prompt: &str) -> Option<Vec<Action>> {
        let compiled = self.compile().ok()?;
        plan_with(&compiled, &self.bugs, prompt)
    }
}

fn plan_with(compiled: &[(Regex, Vec<Action>)], bugs: &[BugBehavior], prompt: &str) -> Option<Vec<Action>> {
    let (_, actions) = compiled.iter().find(|(r, _)| r.is_match(prompt))?;
    Some(bugs.iter().fold(actions.clone(), |acc, b| b.apply(acc)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockKind {
    MockCli,
    MockWebForm,
}

/// A subject agent living on the virtual terminal.
pub trait SubjectAgent: Send {
    fn kind(&self) -> MockKind;
    /// Handles pending screen input, advances scripted work and redraws.
    fn step(&mut self, term: &mut VirtualTerminal, env: &mut Environment, now: f64);
    fn busy(&self) -> bool;
    fn completion_marker(&self) -> &str {
        COMPLETION_MARKER
    }
    /// Prompts taken from the screen, in order.
    fn prompts(&self) -> &[String];
}

pub fn spawn(
    kind: MockKind,
    script: &BehaviorScript,
    screen: &mut Screen,
    env: &mut Environment,
) -> Result<Box<dyn SubjectAgent>, SpawnError> {
    let term = screen
        .terminal_mut()
        .ok_or_else(|| SpawnError::ScreenUnavailable("mock agents need the virtual terminal".into()))?;
    let compiled = script.compile()?;
    let mut agent: Box<dyn SubjectAgent> = match kind {
        MockKind::MockCli => Box::new(MockCli::new(compiled, script.bugs.clone())),
        MockKind::MockWebForm => Box::new(MockWebForm::new(compiled, script.bugs.clone())),
    };
    agent.step(term, env, 0.0);
    Ok(agent)
}

/// Script interpreter shared by the mock front ends.
struct Runner {
    triggers: Vec<(Regex, Vec<Action>)>,
    bugs: Vec<BugBehavior>,
    queue: VecDeque<Action>,
    wake_at: f64,
    spin: usize,
    log: Vec<String>,
    prompts: Vec<String>,
    cwd: JailPath,
}

const SPINNER: [char; 4] = ['|', '/', '-', '\\'];

impl Runner {
    fn new(triggers: Vec<(Regex, Vec<Action>)>, bugs: Vec<BugBehavior>, cwd: JailPath) -> Self {
        Runner { triggers, bugs, queue: VecDeque::new(), wake_at: 0.0, spin: 0, log: Vec::new(), prompts: Vec::new(), cwd }
    }

    fn busy(&self) -> bool {
        !self.queue.is_empty()
    }

    fn submit(&mut self, prompt: &str, now: f64) {
        self.prompts.push(prompt.to_string());
        self.log.push(format!("> {prompt}"));
        match plan_with(&self.triggers, &self.bugs, prompt) {
            Some(actions) => self.queue.extend(actions),
            None => self.queue.extend([Action::Say(NOT_UNDERSTOOD.into()), Action::Done]),
        }
        self.wake_at = now + 1.0;
    }

    fn status(&self) -> String {
        if self.busy() {
            format!("[working {}]", SPINNER[self.spin % SPINNER.len()])
        } else {
            String::new()
        }
    }

    fn advance(&mut self, env: &mut Environment, now: f64) {
        if !self.busy() {
            return;
        }
        self.spin += 1;
        if now < self.wake_at {
            return;
        }
        let Some(action) = self.queue.pop_front() else { return };
        self.wake_at = now + 1.0;
        match action {
            Action::Say(s) => self.log.extend(s.lines().map(String::from)),
            Action::Run(cmd) => {
                self.log.push(format!("$ {cmd}"));
                let (r, cwd) = env.subject_exec(&self.cwd, &cmd);
                self.cwd = cwd;
                self.log.extend(r.stdout.lines().map(String::from));
                self.log.extend(r.stderr.lines().map(String::from));
                if r.exit_code != 0 {
                    self.log.push(format!("(exit status {})", r.exit_code));
                }
            }
            Action::Reply(r) => {
                let body = sign(&expand(env, &r.body), r.signature.as_deref());
                let target = env.mail.find_inbox(&r.thread).map(|m| m.id.clone());
                let outcome = match target {
                    Some(id) => {
                        let t = env.clock.tick();
                        env.mail.reply(&id, &body, t).map(|_| format!("Replied to \"{}\".", r.thread))
                    }
                    None => Ok(format!("Could not find an email about \"{}\".", r.thread)),
                };
                self.log.push(outcome.unwrap_or_else(|e| e.to_string()));
            }
            Action::Compose(c) => {
                let body = sign(&expand(env, &c.body), c.signature.as_deref());
                let t = env.clock.tick();
                let line = match env.mail.compose(&c.to, &c.subject, &body, t) {
                    Ok(_) => format!("Sent \"{}\" to {}.", c.subject, c.to),
                    Err(e) => e.to_string(),
                };
                self.log.push(line);
            }
            Action::Sleep(n) => self.wake_at = now + f64::from(n),
            Action::Done => {
                self.log.push(COMPLETION_MARKER.into());
                self.queue.clear();
            }
        }
    }
}

fn sign(body: &str, signature: Option<&str>) -> String {
    match signature {
        Some(s) => format!("{body}\n\nBest regards,\n{s}"),
        None => body.to_string(),
    }
}

/// Inlines `{file:PATH}` references with the file's contents.
fn expand(env: &Environment, body: &str) -> String {
    let re = Regex::new(r"\{file:([^}]+)\}").expect("static pattern");
    re.replace_all(body, |c: &regex::Captures| {
        let path = &c[1];
        env.sandbox
            .resolve(&JailPath::root(), path)
            .ok()
            .and_then(|p| env.sandbox.read(&p).ok())
            .map(|d| String::from_utf8_lossy(&d).trim_end().to_string())
            .unwrap_or_else(|| format!("(missing {path})"))
    })
    .into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn script() -> BehaviorScript {
        BehaviorScript::from_json(
            r#"{"triggers":[
                {"pattern":"(?i)back ?up","actions":[{"say":"Backing up."},{"run":"cp -r ./projects ./projects_backup"},{"run":"ls ./projects_backup"},"done"]},
                {"pattern":"(?i)backup|reply","actions":["done"]}
            ]}"#,
        )
        .unwrap()
    }

    #[test]
    fn first_match_wins() {
        let p = script().plan("please back up my projects").unwrap();
        assert_eq!(p.len(), 4);
        assert!(script().plan("weather?").is_none());
    }

    #[test]
    fn bugs_rewrite_actions() {
        let s = script().with_bugs(&[BugBehavior::WrongPathBackup]);
        assert_eq!(s.plan("backup").unwrap()[1], Action::Run("cp -r ~/projects ~/projects_backup".into()));
        let s = script().with_bugs(&[BugBehavior::MisreportSuccess]);
        assert!(s.plan("backup").unwrap().iter().all(|a| !a.is_effectful()));
        let s = script().with_bugs(&[BugBehavior::SilentPartial]);
        assert_eq!(s.plan("backup").unwrap().iter().filter(|a| a.is_effectful()).count(), 1);
    }

    #[test]
    fn every_bug_maps_to_a_criterion() {
        for b in [
            BugBehavior::WrongPathBackup,
            BugBehavior::PlaceholderSignoff,
            BugBehavior::MisreportSuccess,
            BugBehavior::SilentPartial,
        ] {
            assert!(BugCriterion::ALL.contains(&b.criterion()));
        }
    }

    #[test]
    fn spawn_needs_virtual_screen() {
        let mut env = Environment::new(&Default::default()).unwrap();
        let mut s = Screen::Display(Default::default());
        assert!(matches!(spawn(MockKind::MockCli, &script(), &mut s, &mut env), Err(SpawnError::ScreenUnavailable(_))));
    }
}

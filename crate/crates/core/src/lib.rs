//! Automated end-to-end testing for GUI and CLI based AI agents.
//!
//! A test run moves through four phases, each operated by dedicated
//! specialists with their own bounded tool registries:
//!
//! 1. **Generation**: a Test Architect drafts a bundled test specification
//!    (environment setup, subject prompt, oracles) and a Test Analyst
//!    reflects on it until it is coherent.
//! 2. **Setup**: an Infrastructure Manager realizes the setup steps through
//!    minimal environment APIs and may revise the test specification.
//! 3. **Execution**: an Engineer launches the subject agent and delivers the
//!    prompt using verified UI primitives, recording change-triggered screen
//!    captures.
//! 4. **Validation**: an Investigator probes the environment and a Judge
//!    reasons over the evidence with question-first (meta chain-of-thought)
//!    prompting, emitting evidence-backed bug reports.
//!
//! Everything runs against deterministic stand-ins by default: a scripted
//! completion provider, a virtual terminal screen, a jailed sandbox with an
//! in-memory mailbox, and scriptable mock subject agents.

pub mod config;
pub mod env;
pub mod llm;
pub mod metrics;
pub mod mock;
pub mod pipeline;
pub mod role;
pub mod spec;
pub mod suite;
pub mod tools;
pub mod ui;

pub use role::{Phase, SpecialistRole};

//! Run directories: a [`RunRecord`] laid out on disk.
//!
//! ```text
//! spec/s0.json ...        one file per specification snapshot
//! spec/revisions.json
//! transcripts/<phase>.json
//! captures/frame-NNNN.txt + index.json
//! verdict.json  ledger.json  summary.json  record.json
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Outcome, RunRecord};
use crate::role::Phase;
use crate::ui::terminal::{DEFAULT_COLS, DEFAULT_ROWS};
use crate::ui::capture::{load_captures, save_captures};

/// Compact per-run facts for suite aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub feature_id: String,
    #[serde(default)]
    pub agent: String,
    /// `pass`, `bugs`, `environment_failure` or `error`.
    pub outcome: String,
    pub bugs: usize,
    pub prompt_delivered: bool,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub responses: u32,
    pub wall_clock_secs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    pub fn summary(&self) -> RunSummary {
        let outcome = match self.verdict.as_ref().map(|v| &v.outcome) {
            Some(Outcome::Pass) => "pass",
            Some(Outcome::Bugs { .. }) => "bugs",
            Some(Outcome::EnvironmentFailure { .. }) => "environment_failure",
            None => "error",
        };
        let total = self.ledger.total();
        RunSummary {
            feature_id: self.feature.id.clone(),
            agent: self.agent.name.clone(),
            outcome: outcome.into(),
            bugs: self.verdict.as_ref().map_or(0, |v| v.bugs().len()),
            prompt_delivered: self.evidence.as_ref().is_some_and(|e| e.prompt_delivered),
            input_tokens: total.input_tokens,
            output_tokens: total.output_tokens,
            responses: self.ledger.responses(),
            wall_clock_secs: self.ledger.total_wall_clock(),
            error: self.error.clone(),
        }
    }

    /// Canonical JSON of the record with wall-clock figures removed, for
    /// comparing runs.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).unwrap_or_default();
        strip_wall_clock(&mut v);
        crate::spec::canonical_json(&v)
    }

    pub fn write_dir(&self, dir: &Path) -> std::io::Result<()> {
        let spec_dir = dir.join("spec");
        std::fs::create_dir_all(&spec_dir)?;
        for (id, snap) in self.spec.snapshots() {
            write_json(&spec_dir.join(format!("{id}.json")), snap)?;
        }
        write_json(&spec_dir.join("revisions.json"), &self.spec.revisions())?;
        let tdir = dir.join("transcripts");
        std::fs::create_dir_all(&tdir)?;
        for p in Phase::ALL {
            let exchanges: Vec<_> = self.exchanges.iter().filter(|e| e.phase == p).collect();
            if exchanges.is_empty() && self.phase(p).is_none() {
                continue;
            }
            let name = self.phase(p).map_or_else(|| format!("transcripts/{p:?}.json"), |r| r.transcript.clone());
            write_json(&dir.join(name), &exchanges)?;
        }
        if let Some(e) = &self.evidence {
            save_captures(&dir.join("captures"), &e.captures)?;
        }
        write_json(&dir.join("verdict.json"), &self.verdict)?;
        write_json(&dir.join("ledger.json"), &self.ledger)?;
        write_json(&dir.join("summary.json"), &self.summary())?;
        write_json(&dir.join("record.json"), self)
    }

    pub fn read_dir(dir: &Path) -> std::io::Result<RunRecord> {
        let data = std::fs::read(dir.join("record.json"))?;
        let mut r: RunRecord = serde_json::from_slice(&data)?;
        let cap = dir.join("captures");
        if let Some(e) = r.evidence.as_mut() {
            if cap.join("index.json").exists() {
                e.captures = load_captures(&cap, DEFAULT_ROWS, DEFAULT_COLS)?;
            }
        }
        Ok(r)
    }
}

fn write_json<T: Serialize + ?Sized>(path: &Path, v: &T) -> std::io::Result<()> {
    std::fs::write(path, crate::spec::canonical_json(&v))
}

fn strip_wall_clock(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("wall_clock");
            m.values_mut().for_each(strip_wall_clock);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_wall_clock),
        _ => {}
    }
}

//! Running many features, each in its own fresh environment.
//!
//! A features file is a JSON array. Each entry is a feature description
//! plus optional per-run settings:
//!
//! ```json
//! [{
//!   "id": "fs-backup", "domain": "file_system", "text": "Back up a folder.",
//!   "agent": "agents/mock_cli.json",
//!   "subject": {"kind": "mock_cli", "script": "scripts/backup.json"},
//!   "transcript": "transcripts/backup_nominal.json",
//!   "faults": [{"kind": "NetworkDown", "trigger": "persistent"}],
//!   "max_retries": 2,
//!   "seed": 11
//! }]
//! ```
//!
//! Paths are relative to the features file. Results land under the output
//! directory as `runs/<feature id>/`, `suite.json` and `suite.txt`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ProviderConfig, ProviderKind, SuiteConfig};
use crate::env::{EnvConfig, Environment, FaultSpec};
use crate::llm::ledger::{PricingTable, TokenUsage};
use crate::llm::scripted::{load_transcript, TranscriptEntry};
use crate::llm::{Gateway, HttpProvider, RetryPolicy, ScriptedProvider};
use crate::metrics::{cost_rows, BugLabel, CostRow, LabelKind};
use crate::mock::{BehaviorScript, MockKind};
use crate::pipeline::record::RunSummary;
use crate::pipeline::{run_test, Outcome, RunConfig, RunRecord, SubjectConfig};
use crate::spec::{validate_feature_list, AgentSpecification, FeatureDescription};

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0} lists no features")]
    Empty(PathBuf),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("feature `{feature}`: {reason}")]
    Feature { feature: String, reason: String },
    #[error("cannot write results to {path}: {reason}")]
    Write { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub kind: MockKind,
    pub script: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    #[serde(flatten)]
    pub feature: FeatureDescription,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<SubjectEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faults: Vec<FaultSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_retries: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Reads a features file, resolving paths against its directory.
pub fn load_features(path: &Path) -> Result<Vec<FeatureEntry>, SuiteError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Read { path: path.to_path_buf(), reason: e.to_string() })?;
    let mut entries: Vec<FeatureEntry> = serde_json::from_str(&text)
        .map_err(|e| ConfigError::Parse { path: path.to_path_buf(), reason: e.to_string() })?;
    if entries.is_empty() {
        return Err(SuiteError::Empty(path.to_path_buf()));
    }
    let features: Vec<_> = entries.iter().map(|e| e.feature.clone()).collect();
    validate_feature_list(&features).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for e in &mut entries {
        let paths = [e.agent.as_mut(), e.transcript.as_mut(), e.subject.as_mut().map(|s| &mut s.script)];
        for p in paths.into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
    Ok(entries)
}

/// Everything one run needs, resolved and loaded up front.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub feature: FeatureDescription,
    pub agent: AgentSpecification,
    pub env: EnvConfig,
    pub run: RunConfig,
    provider: ProviderConfig,
    transcript: Vec<TranscriptEntry>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Resolves agents, scripts and transcripts for every entry. Scripted
/// providers need a transcript either in the entry or in `cfg`.
pub fn prepare(cfg: &SuiteConfig, entries: &[FeatureEntry]) -> Result<Vec<PreparedRun>, SuiteError> {
    cfg.validate()?;
    entries
        .iter()
        .map(|e| {
            let fail = |reason: String| SuiteError::Feature { feature: e.feature.id.clone(), reason };
            let agent_path = e.agent.as_ref().or(cfg.agent.as_ref()).ok_or_else(|| fail("no agent specification".into()))?;
            let agent: AgentSpecification = read_json(agent_path).map_err(fail)?;
            let subject = match &e.subject {
                Some(s) => {
                    let script: BehaviorScript = read_json(&s.script).map_err(fail)?;
                    Some(SubjectConfig { kind: s.kind, script })
                }
                None => None,
            };
            let transcript = match cfg.provider.kind {
                ProviderKind::Scripted => {
                    let p = e
                        .transcript
                        .as_ref()
                        .or(cfg.provider.transcript.as_ref())
                        .ok_or_else(|| fail("the scripted provider requires a transcript".into()))?;
                    load_transcript(p).map_err(|err| fail(format!("{}: {err}", p.display())))?
                }
                ProviderKind::Http => Vec::new(),
            };
            let run = RunConfig {
                max_retries: e.max_retries.unwrap_or(cfg.max_retries),
                subject,
                faults: e.faults.clone(),
                ..RunConfig::default()
            };
            Ok(PreparedRun {
                feature: e.feature.clone(),
                agent,
                env: EnvConfig { seed: e.seed.unwrap_or(cfg.seed), ..EnvConfig::default() },
                run,
                provider: cfg.provider.clone(),
                transcript,
            })
        })
        .collect()
}

impl PreparedRun {
    /// Runs all four phases in a fresh environment.
    pub fn execute(&self) -> Result<RunRecord, String> {
        let mut env = Environment::new(&self.env).map_err(|e| e.to_string())?;
        let mut gateway = match self.provider.kind {
            // recorded responses never need a real back-off
            ProviderKind::Scripted => Gateway::new(Box::new(ScriptedProvider::new(self.transcript.clone())))
                .with_retry(RetryPolicy::default(), Box::new(|_| {})),
            ProviderKind::Http => {
                let cfg = self.provider.http().map_err(|e| e.to_string())?;
                Gateway::new(Box::new(HttpProvider::new(cfg)))
            }
        };
        Ok(run_test(&self.feature, &self.agent, &mut env, &mut gateway, &self.run))
    }
}

/// One finished run, or the reason it could not start.
#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub feature_id: String,
    pub agent: String,
    pub record: Result<RunRecord, String>,
}

impl SuiteRun {
    pub fn summary(&self) -> RunSummary {
        match &self.record {
            Ok(r) => r.summary(),
            Err(e) => RunSummary {
                feature_id: self.feature_id.clone(),
                agent: self.agent.clone(),
                outcome: "error".into(),
                bugs: 0,
                prompt_delivered: false,
                input_tokens: 0,
                output_tokens: 0,
                responses: 0,
                wall_clock_secs: 0.0,
                error: Some(e.clone()),
            },
        }
    }
}

/// Runs every prepared feature on `jobs` worker threads. Output order
/// follows input order.
pub fn run_all(runs: &[PreparedRun], jobs: usize) -> Vec<SuiteRun> {
    let go = |p: &PreparedRun| SuiteRun {
        feature_id: p.feature.id.clone(),
        agent: p.agent.name.clone(),
        record: p.execute(),
    };
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(|| runs.par_iter().map(go).collect()),
        Err(_) => runs.iter().map(go).collect(),
    }
}

/// Suite totals. Everything here is a fold over the per-run records, so it
/// can be recomputed from run directories alone.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub runs: Vec<RunSummary>,
    pub pass: usize,
    pub bugs: usize,
    pub environment_failures: usize,
    pub errors: usize,
    /// Bugs reported by runs that ended in an environment failure.
    pub bugs_in_environment_failures: usize,
    /// Calls attempted more often than their run's retry budget allows.
    pub retry_violations: Vec<String>,
    pub usage: TokenUsage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cost_rows: Vec<CostRow>,
}

impl SuiteReport {
    pub fn fold(runs: &[SuiteRun], pricing: Option<&PricingTable>) -> Self {
        let mut r = SuiteReport::default();
        for run in runs {
            let s = run.summary();
            match s.outcome.as_str() {
                "pass" => r.pass += 1,
                "bugs" => r.bugs += 1,
                "environment_failure" => {
                    r.environment_failures += 1;
                    r.bugs_in_environment_failures += s.bugs;
                }
                _ => r.errors += 1,
            }
            r.usage += TokenUsage::new(s.input_tokens, s.output_tokens);
            if let Ok(rec) = &run.record {
                r.retry_violations.extend(retry_violations(rec));
            }
            r.runs.push(s);
        }
        r.cost = pricing.map(|p| p.cost(r.usage));
        r.cost_rows = cost_rows(&r.runs, pricing);
        r
    }

    pub fn from_records(records: &[RunRecord], pricing: Option<&PricingTable>) -> Self {
        let runs: Vec<SuiteRun> = records
            .iter()
            .map(|r| SuiteRun { feature_id: r.feature.id.clone(), agent: r.agent.name.clone(), record: Ok(r.clone()) })
            .collect();
        Self::fold(&runs, pricing)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let w = self.runs.iter().map(|r| r.feature_id.len()).max().unwrap_or(7).max(7);
        out.push_str(&format!("{:<w$}  {:<19}  {:>4}  {:>8}  {:>8}\n", "feature", "outcome", "bugs", "input", "output"));
        for s in &self.runs {
            out.push_str(&format!(
                "{:<w$}  {:<19}  {:>4}  {:>8}  {:>8}\n",
                s.feature_id, s.outcome, s.bugs, s.input_tokens, s.output_tokens
            ));
            if let Some(e) = &s.error {
                out.push_str(&format!("{:<w$}    error: {e}\n", ""));
            }
        }
        out.push_str(&format!(
            "\n{} runs: {} pass, {} with bugs, {} environment failures ({} bugs), {} errors\n",
            self.runs.len(),
            self.pass,
            self.bugs,
            self.environment_failures,
            self.bugs_in_environment_failures,
            self.errors
        ));
        out.push_str(&format!("tokens: {} in, {} out", self.usage.input_tokens, self.usage.output_tokens));
        if let Some(c) = self.cost {
            out.push_str(&format!(", cost ${c:.2}"));
        }
        out.push('\n');
        if self.retry_violations.is_empty() {
            out.push_str("retry budget respected in every run\n");
        }
        for v in &self.retry_violations {
            out.push_str(&format!("retry violation: {v}\n"));
        }
        out
    }
}

fn retry_violations(rec: &RunRecord) -> Vec<String> {
    let mut per_call: BTreeMap<&str, u32> = BTreeMap::new();
    for a in &rec.attempts {
        let n = per_call.entry(a.call_id.as_str()).or_default();
        *n = (*n).max(a.attempt);
    }
    per_call
        .into_iter()
        .filter(|(_, n)| *n > rec.max_retries)
        .map(|(id, n)| format!("{}: call {id} attempted {n} times (budget {})", rec.feature.id, rec.max_retries))
        .collect()
}

/// Writes each record to `out/runs/<feature id>/` plus `suite.json` and
/// `suite.txt`.
pub fn write_results(out: &Path, runs: &[SuiteRun], report: &SuiteReport) -> Result<(), SuiteError> {
    let werr = |p: &Path, e: std::io::Error| SuiteError::Write { path: p.to_path_buf(), reason: e.to_string() };
    let runs_dir = out.join("runs");
    std::fs::create_dir_all(&runs_dir).map_err(|e| werr(&runs_dir, e))?;
    for run in runs {
        let dir = runs_dir.join(&run.feature_id);
        match &run.record {
            Ok(r) => r.write_dir(&dir).map_err(|e| werr(&dir, e))?,
            Err(_) => {
                std::fs::create_dir_all(&dir).map_err(|e| werr(&dir, e))?;
                let p = dir.join("summary.json");
                std::fs::write(&p, crate::spec::canonical_json(&run.summary())).map_err(|e| werr(&p, e))?;
            }
        }
    }
    let p = out.join("suite.json");
    std::fs::write(&p, crate::spec::canonical_json(report)).map_err(|e| werr(&p, e))?;
    let p = out.join("suite.txt");
    std::fs::write(&p, report.render_text()).map_err(|e| werr(&p, e))
}

/// Reads every run directory under `out/runs`, in name order.
pub fn read_results(out: &Path) -> std::io::Result<Vec<RunRecord>> {
    let mut dirs: Vec<_> = std::fs::read_dir(out.join("runs"))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("record.json").exists())
        .collect();
    dirs.sort();
    dirs.iter().map(|d| RunRecord::read_dir(d)).collect()
}

/// Labels reported bugs against the bugs each feature is known to contain,
/// matching on criterion. Each expected criterion absorbs at most one
/// report.
pub fn label_against(records: &[RunRecord], expected: &HashMap<String, Vec<String>>) -> Vec<BugLabel> {
    let mut out = Vec::new();
    for r in records {
        let delivered = r.evidence.as_ref().is_some_and(|e| e.prompt_delivered);
        let mut left: Vec<&str> = expected.get(&r.feature.id).map_or_else(Vec::new, |v| v.iter().map(String::as_str).collect());
        let reported = r.verdict.as_ref().map_or(&[][..], |v| v.bugs());
        let mut mk = |n: usize, label, what: &str| {
            out.push(BugLabel {
                report: format!("{}#{n}:{what}", r.feature.id),
                test: r.feature.id.clone(),
                agent: r.agent.name.clone(),
                label,
                env_setup_caused: false,
                prompt_successful: delivered,
            })
        };
        for (i, b) in reported.iter().enumerate() {
            let c = b.criterion.as_str();
            match left.iter().position(|x| *x == c) {
                Some(k) => {
                    left.remove(k);
                    mk(i, LabelKind::TP, c);
                }
                None => mk(i, LabelKind::FP, c),
            }
        }
        let unmatched: BTreeSet<&str> = left.into_iter().collect();
        for (j, c) in unmatched.into_iter().enumerate() {
            mk(reported.len() + j, LabelKind::FN, c);
        }
    }
    out
}

/// Exit status for a single run: 0 pass, 10 bugs, 20 environment failure,
/// 1 anything else.
pub fn exit_code(rec: &RunRecord) -> i32 {
    match rec.verdict.as_ref().map(|v| &v.outcome) {
        Some(Outcome::Pass) => 0,
        Some(Outcome::Bugs { .. }) => 10,
        Some(Outcome::EnvironmentFailure { .. }) => 20,
        None => 1,
    }
}

/// Exit status for a suite: the most severe run outcome, ranked error,
/// environment failure, bugs, pass.
pub fn suite_exit_code(report: &SuiteReport) -> i32 {
    if report.errors > 0 {
        1
    } else if report.environment_failures > 0 {
        20
    } else if report.bugs > 0 {
        10
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_features_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.json");
        std::fs::write(&p, "[]").unwrap();
        assert!(matches!(load_features(&p), Err(SuiteError::Empty(_))));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.json");
        std::fs::write(&p, r#"[{"id":"a","domain":"email","text":"x"},{"id":"a","domain":"email","text":"y"}]"#).unwrap();
        assert!(matches!(load_features(&p), Err(SuiteError::Config(_))));
    }

    #[test]
    fn paths_resolve_against_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.json");
        std::fs::write(
            &p,
            r#"[{"id":"a","domain":"email","text":"x","agent":"ag.json","subject":{"kind":"mock_cli","script":"s.json"}}]"#,
        )
        .unwrap();
        let e = load_features(&p).unwrap();
        assert_eq!(e[0].agent.as_deref(), Some(dir.path().join("ag.json").as_path()));
        assert_eq!(e[0].subject.as_ref().unwrap().script, dir.path().join("s.json"));
    }

    #[test]
    fn scripted_needs_transcript() {
        let dir = tempfile::tempdir().unwrap();
        let ag = dir.path().join("ag.json");
        std::fs::write(&ag, r#"{"name":"a","platform":"cli","launch":["a"]}"#).unwrap();
        let entries = vec![FeatureEntry {
            feature: FeatureDescription::new("f", crate::spec::FeatureDomain::Email, "t"),
            agent: Some(ag),
            subject: None,
            transcript: None,
            faults: vec![],
            max_retries: None,
            seed: None,
        }];
        let cfg = SuiteConfig::new("x");
        let e = prepare(&cfg, &entries).unwrap_err();
        assert!(e.to_string().contains("requires a transcript"), "{e}");
    }
}

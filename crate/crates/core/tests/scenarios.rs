//! Whole runs against the mock subjects: the golden suite, fault injection,
//! a 99-feature suite and pipeline edge cases.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use agentprobe::config::SuiteConfig;
use agentprobe::env::{EnvConfig, Environment};
use agentprobe::llm::{Gateway, RetryPolicy, ScriptedProvider, TranscriptEntry};
use agentprobe::metrics::{bug_confusion, TestPrompt};
use agentprobe::mock::BehaviorScript;
use agentprobe::pipeline::{run_test, BugCriterion, Outcome, PhaseStatus, RunConfig, RunRecord, SubjectConfig};
use agentprobe::spec::AgentSpecification;
use agentprobe::suite::{self, label_against, load_features, prepare, read_results, run_all, SuiteReport, SuiteRun};
use agentprobe::tools::registry_for;
use agentprobe::{Phase, SpecialistRole};
use serde_json::{json, Value};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run_suite(name: &str, out: &Path) -> (SuiteConfig, Vec<SuiteRun>) {
    let mut cfg = SuiteConfig::load(&fixtures().join("suites").join(name).join("suite.toml")).unwrap();
    cfg.out = out.to_path_buf();
    let entries = load_features(&cfg.features).unwrap();
    let prepared = prepare(&cfg, &entries).unwrap();
    let runs = run_all(&prepared, cfg.jobs);
    (cfg, runs)
}

fn records(runs: &[SuiteRun]) -> Vec<RunRecord> {
    runs.iter().map(|r| r.record.clone().unwrap()).collect()
}

fn criteria(rec: &RunRecord) -> Vec<BugCriterion> {
    rec.verdict.as_ref().map_or_else(Vec::new, |v| v.bugs().iter().map(|b| b.criterion).collect())
}

#[test]
fn golden_suite_verdicts() {
    let out = tempfile::tempdir().unwrap();
    let (_, runs) = run_suite("golden", out.path());
    let recs = records(&runs);
    let by_id: HashMap<&str, &RunRecord> = recs.iter().map(|r| (r.feature.id.as_str(), r)).collect();

    assert_eq!(criteria(by_id["backup-wrong-path"]), [BugCriterion::CompletionImpact]);
    assert_eq!(criteria(by_id["reply-placeholder"]), [BugCriterion::QualityImpact]);
    for id in ["backup-nominal", "reply-nominal"] {
        assert_eq!(by_id[id].verdict.as_ref().unwrap().outcome, Outcome::Pass, "{id}");
    }
    let codes: Vec<i32> = recs.iter().map(suite::exit_code).collect();
    assert_eq!(codes, [10, 0, 10, 0]);
    for r in &recs {
        let ev = r.evidence.as_ref().unwrap();
        assert!(ev.prompt_delivered && ev.prompt_evidence.is_some(), "{}", r.feature.id);
    }
}

#[test]
fn runs_are_deterministic() {
    let first: Vec<String> = {
        let out = tempfile::tempdir().unwrap();
        records(&run_suite("golden", out.path()).1).iter().map(RunRecord::deterministic_json).collect()
    };
    for _ in 0..4 {
        let out = tempfile::tempdir().unwrap();
        let again: Vec<String> = records(&run_suite("golden", out.path()).1).iter().map(RunRecord::deterministic_json).collect();
        assert_eq!(again, first);
    }
}

#[test]
fn run_directories_round_trip() {
    let out = tempfile::tempdir().unwrap();
    let (_, runs) = run_suite("golden", out.path());
    for rec in records(&runs) {
        let dir = out.path().join(&rec.feature.id);
        rec.write_dir(&dir).unwrap();
        for f in ["record.json", "verdict.json", "ledger.json", "summary.json", "spec/s0.json", "spec/revisions.json"] {
            assert!(dir.join(f).exists(), "{f}");
        }
        let back = RunRecord::read_dir(&dir).unwrap();
        assert_eq!(back, rec);
    }
}

#[test]
fn phases_thread_the_specification() {
    let out = tempfile::tempdir().unwrap();
    for rec in records(&run_suite("golden", out.path()).1) {
        let order: Vec<Phase> = rec.phases.iter().map(|p| p.phase).collect();
        assert_eq!(order, Phase::ALL);
        for w in rec.phases.windows(2) {
            assert_eq!(w[1].spec_in, w[0].spec_out);
        }
        assert_eq!(rec.phases.last().unwrap().spec_out, rec.spec.active_id());
        assert!(rec.phases.iter().all(|p| p.status == PhaseStatus::Completed));
    }
}

#[test]
fn each_role_only_uses_its_own_tools() {
    let out = tempfile::tempdir().unwrap();
    for rec in records(&run_suite("golden", out.path()).1) {
        for role in SpecialistRole::ALL {
            let reg = registry_for(role, rec.agent.platform);
            for tool in rec.tools_used_by(role) {
                assert!(reg.contains(tool), "{role} used {tool}");
            }
        }
        assert!(rec.tools_used_by(SpecialistRole::InfrastructureManager).contains(&"exec_command")
            || rec.tools_used_by(SpecialistRole::InfrastructureManager).contains(&"send_email"));
        assert!(rec.tools_used_by(SpecialistRole::Engineer).contains(&"type_verified"));
        assert!(rec.tools_used_by(SpecialistRole::TestArchitect).is_empty());
        assert!(rec.tools_used_by(SpecialistRole::Judge).is_empty());
    }
}

#[test]
fn persistent_faults_end_in_environment_failures() {
    let out = tempfile::tempdir().unwrap();
    let (_, runs) = run_suite("faults", out.path());
    assert_eq!(runs.len(), 20);
    let report = SuiteReport::fold(&runs, None);
    assert_eq!(report.environment_failures, 20, "{}", report.render_text());
    assert_eq!((report.pass, report.bugs, report.errors, report.bugs_in_environment_failures), (0, 0, 0, 0));
    assert!(report.retry_violations.is_empty(), "{:?}", report.retry_violations);
    for rec in records(&runs) {
        assert_eq!(suite::exit_code(&rec), 20);
        assert!(!rec.fault_log.is_empty());
        let setup = rec.phase(Phase::Setup).unwrap();
        assert_eq!(setup.status, PhaseStatus::AbortedEnvFailure);
        assert!(rec.phase(Phase::Execution).is_none());
        let max = rec.attempts.iter().map(|a| a.attempt).max().unwrap();
        assert_eq!(max, rec.max_retries, "{}", rec.feature.id);
    }
}

#[test]
fn full_suite_matches_known_bugs() {
    let out = tempfile::tempdir().unwrap();
    let (cfg, runs) = run_suite("full", out.path());
    assert_eq!(runs.len(), 99);
    let recs = records(&runs);
    let expected: HashMap<String, Vec<String>> = serde_json::from_str(
        &std::fs::read_to_string(fixtures().join("suites/full/expected_bugs.json")).unwrap(),
    )
    .unwrap();
    let labels = label_against(&recs, &expected);
    let prompts: Vec<TestPrompt> = recs
        .iter()
        .map(|r| TestPrompt {
            test: r.feature.id.clone(),
            agent: r.agent.name.clone(),
            prompt_successful: r.evidence.as_ref().is_some_and(|e| e.prompt_delivered),
            bugs_labeled: true,
        })
        .collect();
    let c = bug_confusion(&labels, &prompts);
    assert_eq!((c.tp, c.total_fp(), c.fn_), (50, 0, 0));
    assert_eq!(c.precision(), Some(1.0));
    assert_eq!(c.recall(), Some(1.0));
    assert_eq!(c.psr(), Some(100.0));

    let pricing = cfg.load_pricing().unwrap();
    let report = SuiteReport::fold(&runs, pricing.as_ref());
    suite::write_results(out.path(), &runs, &report).unwrap();
    let reread = SuiteReport::from_records(&read_results(out.path()).unwrap(), pricing.as_ref());
    let mut sorted = runs.clone();
    sorted.sort_by(|a, b| a.feature_id.cmp(&b.feature_id));
    assert_eq!(reread, SuiteReport::fold(&sorted, pricing.as_ref()));
    assert_eq!((reread.pass, reread.bugs, reread.usage), (report.pass, report.bugs, report.usage));
    assert!(out.path().join("suite.txt").exists());
}

// Inline transcripts built from the recorded backup run.

fn backup_entries() -> Vec<Value> {
    let text = std::fs::read_to_string(fixtures().join("transcripts/backup_bug.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn entries(values: Vec<Value>) -> Vec<TranscriptEntry> {
    values.into_iter().map(|v| serde_json::from_value(v).unwrap()).collect()
}

fn run_backup(transcript: Vec<Value>, script: BehaviorScript) -> RunRecord {
    let feature = load_features(&fixtures().join("suites/golden/features.json")).unwrap().remove(0).feature;
    let agent: AgentSpecification =
        serde_json::from_str(&std::fs::read_to_string(fixtures().join("agents/mock_cli.json")).unwrap()).unwrap();
    let mut env = Environment::new(&EnvConfig::default()).unwrap();
    let mut gw = Gateway::new(Box::new(ScriptedProvider::new(entries(transcript))))
        .with_retry(RetryPolicy::default(), Box::new(|_| {}));
    let cfg = RunConfig {
        subject: Some(SubjectConfig { kind: agentprobe::mock::MockKind::MockCli, script }),
        ..RunConfig::default()
    };
    run_test(&feature, &agent, &mut env, &mut gw, &cfg)
}

fn script(name: &str) -> BehaviorScript {
    BehaviorScript::from_json(&std::fs::read_to_string(fixtures().join("scripts").join(format!("{name}.json"))).unwrap())
        .unwrap()
}

fn with_bogus_setup_tool(mut t: Vec<Value>) -> Vec<Value> {
    let draft = t[0]["content"].as_str().unwrap().replace("\"tool\": \"exec_command\"", "\"tool\": \"teleport\"");
    t[0]["content"] = Value::String(draft);
    t
}

fn analyst(turn: u32, content: Value) -> Value {
    json!({"role": "test_analyst", "turn": turn, "content": content.to_string(),
           "usage": {"input_tokens": 100, "output_tokens": 10}})
}

#[test]
fn analyst_repairs_an_unavailable_setup_tool() {
    let mut t = with_bogus_setup_tool(backup_entries());
    let step = json!({"id": "s1", "intent": "a projects folder with a couple of source files in the working directory ~/work",
                      "target": "file_system", "provides": ["projects"], "tool": "exec_command"});
    t[1] = analyst(0, json!({"decision": "revise", "description": "use a tool the manager has",
                             "edits": [{"op": "replace_setup_step", "step": step}]}));
    let rec = run_backup(t, script("backup_wrong_path"));
    assert!(rec.error.is_none(), "{:?}", rec.error);
    assert_eq!(rec.spec.setup_steps()[0].tool.as_deref(), Some("exec_command"));
    let gen = rec.phase(Phase::Generation).unwrap();
    assert_ne!(gen.spec_in, gen.spec_out);
    assert_eq!(criteria(&rec), [BugCriterion::CompletionImpact]);
}

#[test]
fn unrepaired_draft_stops_in_generation() {
    let mut t = with_bogus_setup_tool(backup_entries());
    t.insert(2, analyst(1, json!({"decision": "approve"})));
    t.insert(3, analyst(2, json!({"decision": "approve"})));
    let rec = run_backup(t, script("backup"));
    assert!(rec.verdict.is_none());
    assert_eq!(suite::exit_code(&rec), 1);
    assert!(rec.error.as_deref().unwrap().contains("incoherent"), "{:?}", rec.error);
    assert_eq!(rec.phases.len(), 1);
    assert_eq!(rec.phases[0].status, PhaseStatus::AbortedFatal);
    assert!(rec.tool_log.is_empty());
}

#[test]
fn busy_subject_times_out_with_prompt_delivered() {
    let busy = BehaviorScript::from_json(
        r#"{"triggers": [{"pattern": "(?i)back ?up", "actions": [{"say": "Working on it."}, {"sleep": 1000}, "done"]}]}"#,
    )
    .unwrap();
    let rec = run_backup(backup_entries(), busy);
    let ev = rec.evidence.as_ref().unwrap();
    assert!(ev.timed_out);
    assert!(ev.prompt_delivered);
    assert_eq!(rec.phase(Phase::Execution).unwrap().status, PhaseStatus::Completed);
}

//! The binary end to end: exit codes, output layout and reports.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn config(suite: &str) -> PathBuf {
    fixtures().join("suites").join(suite).join("suite.toml")
}

fn agentprobe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agentprobe"))
        .args(args)
        .env_remove("SPECOPS_CONFIG")
        .env_remove("SPECOPS_SEED")
        .env_remove("SPECOPS_MAX_RETRIES")
        .output()
        .unwrap()
}

fn run(suite: &str, feature: &str, out: &Path) -> Output {
    agentprobe(&["run", "--config", config(suite).to_str().unwrap(), "--feature", feature, "--out", out.to_str().unwrap()])
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_exit_codes_follow_the_verdict() {
    let out = tempfile::tempdir().unwrap();
    let o = run("golden", "backup-wrong-path", out.path());
    assert_eq!(o.status.code(), Some(10), "{o:?}");
    let verdict: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("runs/backup-wrong-path/verdict.json")).unwrap())
            .unwrap();
    assert_eq!(verdict["bugs"].as_array().unwrap().len(), 1);

    assert_eq!(run("golden", "backup-nominal", out.path()).status.code(), Some(0));

    let o = run("faults", "reply-fault-01", out.path());
    assert_eq!(o.status.code(), Some(20), "{o:?}");
    let verdict = std::fs::read_to_string(out.path().join("runs/reply-fault-01/verdict.json")).unwrap();
    assert!(verdict.contains("environment_failure") && !verdict.contains("\"bugs\""), "{verdict}");
}

#[test]
fn unknown_feature_is_a_usage_error() {
    let out = tempfile::tempdir().unwrap();
    let o = run("golden", "no-such-feature", out.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no-such-feature"));
}

#[test]
fn empty_features_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("suite.toml");
    let features = fixtures().join("suites/empty_features.json");
    std::fs::write(&cfg, format!("features = {:?}\n[provider]\nkind = \"scripted\"\n", features.to_str().unwrap()))
        .unwrap();
    let o = agentprobe(&["suite", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{o:?}");
}

#[test]
fn missing_transcript_is_a_framework_error() {
    let dir = tempfile::tempdir().unwrap();
    let features = dir.path().join("features.json");
    std::fs::write(
        &features,
        format!(
            r#"[{{"id": "x", "domain": "file_system", "text": "Back up a folder.", "agent": {:?}}}]"#,
            fixtures().join("agents/mock_cli.json").to_str().unwrap()
        ),
    )
    .unwrap();
    let cfg = dir.path().join("suite.toml");
    std::fs::write(&cfg, "features = \"features.json\"\n").unwrap();
    let o = agentprobe(&["run", "--config", cfg.to_str().unwrap(), "--feature", "x"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("transcript"));
}

#[test]
fn fault_suite_reports_twenty_environment_failures() {
    let out = tempfile::tempdir().unwrap();
    let o = agentprobe(&["suite", "--config", config("faults").to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(20), "{o:?}");
    let text = stdout(&o);
    assert!(text.contains("20 runs: 0 pass, 0 with bugs, 20 environment failures (0 bugs), 0 errors"), "{text}");
    assert!(text.contains("retry budget respected in every run"));
    for f in ["suite.json", "suite.txt", "metrics.json", "metrics.txt", "runs/reply-fault-20/record.json"] {
        assert!(out.path().join(f).exists(), "{f}");
    }
}

#[test]
fn golden_suite_then_report_from_its_directory() {
    let out = tempfile::tempdir().unwrap();
    let o = agentprobe(&[
        "suite",
        "--config",
        config("golden").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--jobs",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(10), "{o:?}");
    assert!(stdout(&o).contains("4 runs: 2 pass, 2 with bugs"));

    let json = out.path().join("report.json");
    let o = agentprobe(&["report", out.path().to_str().unwrap(), "--json", json.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let text = stdout(&o);
    assert!(text.contains("mock-cli") && text.contains("mock-mail-assistant"), "{text}");
    // steps are counted from the runs; correctness needs a human
    assert!(text.contains('?'), "{text}");
    let ms: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(ms[0]["system"], "agentprobe");
    assert_eq!(ms[0]["total"]["tests"], 4);
}

#[test]
fn report_reproduces_annotated_tables() {
    let ann: Vec<String> = ["agentprobe", "llm-scripts", "autogpt"]
        .iter()
        .map(|s| fixtures().join("annotations").join(format!("{s}.jsonl")).to_str().unwrap().to_string())
        .collect();
    let o = agentprobe(&["report", "--annotations", &ann[0], "--annotations", &ann[1], "--annotations", &ann[2]]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let text = stdout(&o);
    for cell in ["96.0% (1551/1615)", "0.92", "0.86", "0.89", "49.5%", "11.1%"] {
        assert!(text.contains(cell), "missing {cell}\n{text}");
    }
}

#[test]
fn report_with_no_inputs_prints_empty_tables() {
    let o = agentprobe(&["report"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let text = stdout(&o);
    assert!(text.contains("Discretized steps") && text.contains("Total"), "{text}");
}

#[test]
fn report_rejects_a_path_that_is_not_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = agentprobe(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

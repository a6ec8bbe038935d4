//! Acceptance criteria, one line each.
//!
//! Every criterion runs in order, prints `PASS` or `FAIL` with its runtime
//! and budget, and the binary exits non-zero if any failed. Oracles here are
//! computed directly from frames, counts and fixtures, not through the code
//! under test.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use agentprobe::config::SuiteConfig;
use agentprobe::env::{EnvDiff, ProbeDomain};
use agentprobe::llm::ledger::LedgerEntry;
use agentprobe::llm::{cost_estimate, PricingTable, TokenLedger, TokenUsage};
use agentprobe::metrics::{
    bug_confusion, build_suite_metrics, discretize, fmt_metric, fmt_pct, fmt_ratio, score_execution, AnnotationSet,
    BugLabel, ElementKind, LabelKind, PlanDocument, PlanElement, StepAnnotation, StepKind, StepPhase, TestPrompt,
};
use agentprobe::pipeline::validate::DiffChange;
use agentprobe::pipeline::{BugCriterion, EvidenceRef, Outcome, RunRecord};
use agentprobe::spec::{
    new_specification, revise_specification, AgentSpecification, CheckKind, FeatureDescription, FeatureDomain, Oracle,
    Platform, RevisionDelta, SetupStep, SetupTarget, SpecEdit,
};
use agentprobe::suite::{load_features, prepare, run_all, SuiteReport};
use agentprobe::tools::{dispatch, registry_for, FatalKind, ToolCall, ToolHost, ToolOutcome, ToolStatus};
use agentprobe::ui::{
    resolve_target, type_verified, watch_changes, ClickResult, Frame, FramePoll, InputField, PositionHint,
    ScreenBackend, ScreenError, TypeResult, VirtualTerminal,
};
use agentprobe::{Phase, SpecialistRole};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn main() {
    let criteria: Vec<(&str, Duration, fn() -> Check)> = vec![
        ("1 metrics reproduction", Duration::from_secs(1), metrics_reproduction),
        ("2 step discretization", Duration::from_secs(1), step_discretization),
        ("3 backup scenario", Duration::from_secs(50), backup_scenario),
        ("4 placeholder scenario", Duration::from_secs(10), placeholder_scenario),
        ("5 environment failures", Duration::from_secs(60), environment_failures),
        ("6 ui tool properties", Duration::from_secs(30), ui_properties),
        ("7 phase isolation and role gates", Duration::from_secs(5), isolation_and_gates),
        ("8 cost ledger conservation", Duration::from_secs(1), ledger_conservation),
    ];
    let mut failed = 0;
    for (name, budget, f) in criteria {
        let start = Instant::now();
        let r = f();
        let took = start.elapsed();
        let r = match r {
            Ok(d) if took > budget => Err(format!("{d}; over budget")),
            other => other,
        };
        match r {
            Ok(detail) => println!("PASS  {name:<34} {:>8.3}s / {:>3}s  {detail}", took.as_secs_f64(), budget.as_secs()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<34} {:>8.3}s / {:>3}s  {why}", took.as_secs_f64(), budget.as_secs());
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

// 1

fn labels(tp: usize, fp: usize, excluded: usize, fn_: usize) -> Vec<BugLabel> {
    let mk = |i: usize, label, ok| BugLabel {
        report: format!("r{i}"),
        test: format!("t{}", i % 7),
        agent: "A".into(),
        label,
        env_setup_caused: false,
        prompt_successful: ok,
    };
    let mut v = Vec::new();
    v.extend((0..tp).map(|i| mk(i, LabelKind::TP, true)));
    v.extend((0..fp).map(|i| mk(tp + i, LabelKind::FP, true)));
    v.extend((0..excluded).map(|i| mk(tp + fp + i, LabelKind::FP, false)));
    v.extend((0..fn_).map(|i| mk(tp + fp + excluded + i, LabelKind::FN, true)));
    v
}

fn prompts(total: usize, ok: usize) -> Vec<TestPrompt> {
    (0..total)
        .map(|i| TestPrompt { test: format!("p{i}"), agent: "A".into(), prompt_successful: i < ok, bugs_labeled: true })
        .collect()
}

fn metrics_reproduction() -> Check {
    // raw counts straight from the published tables
    let c = bug_confusion(&labels(164, 15, 0, 26), &prompts(99, 99));
    let got = [fmt_metric(c.precision()), fmt_metric(c.recall()), fmt_metric(c.f1()), fmt_pct(c.psr())];
    ensure(got == ["0.92", "0.86", "0.89", "100.0%"], || format!("framework row {got:?}"))?;
    // 164 / (164 + 15) = 0.9162, 164 / 190 = 0.8632
    ensure((c.precision().unwrap() - 164.0 / 179.0).abs() < 1e-12, || "precision formula".into())?;

    let c = bug_confusion(&labels(13, 29, 29, 31), &prompts(99, 49));
    let got = [fmt_pct(c.psr()), fmt_metric(c.precision()), fmt_metric(c.recall())];
    ensure(got == ["49.5%", "0.18", "0.30"], || format!("scripted baseline {got:?}"))?;
    let c = bug_confusion(&labels(0, 0, 0, 11), &prompts(99, 11));
    let got = [fmt_pct(c.psr()), fmt_metric(c.precision()), fmt_metric(c.recall()), fmt_metric(c.f1())];
    ensure(got == ["11.1%", "-", "0.00", "-"], || format!("autonomous baseline {got:?}"))?;

    // 1551 of 1615 validation steps executed correctly
    let plan = PlanDocument {
        test: "t".into(),
        agent: "A".into(),
        elements: vec![PlanElement {
            id: "v".into(),
            phase: StepPhase::Validation,
            kind: Some(ElementKind::NaturalLanguage { statements: vec![String::new(); 1615] }),
        }],
    };
    let steps = discretize(&plan).map_err(|e| e.to_string())?;
    let ann: Vec<StepAnnotation> = steps
        .iter()
        .enumerate()
        .map(|(i, s)| StepAnnotation { executed_ok: i >= 64, ..StepAnnotation::ok(&s.id) })
        .collect();
    let e = score_execution(&steps, &ann).map_err(|e| e.to_string())?;
    let cell = fmt_ratio(&e.phases[&StepPhase::Validation]);
    ensure(cell == "96.0% (1551/1615)", || format!("validation {cell}"))?;

    let mut summary = Vec::new();
    for (system, psr) in [("agentprobe", "100.0%"), ("llm-scripts", "49.5%"), ("autogpt", "11.1%")] {
        let set = AnnotationSet::load(&fixtures().join(format!("annotations/{system}.jsonl"))).map_err(|e| e.to_string())?;
        let m = build_suite_metrics(system, &set, &[], None).map_err(|e| e.to_string())?;
        let b = m.total.bugs.as_ref().ok_or("no bug cells")?;
        ensure(fmt_pct(b.psr()) == psr, || format!("{system} PSR {}", fmt_pct(b.psr())))?;
        summary.push(format!("{system} PSR {psr}"));
    }
    Ok(format!("P/R/F1 0.92/0.86/0.89, validation 96.0%, {}", summary.join(", ")))
}

// 2

#[derive(Deserialize)]
struct CorpusEntry {
    element: PlanElement,
    expected: usize,
}

fn step_discretization() -> Check {
    let text = std::fs::read_to_string(fixtures().join("plans/discretization.json")).map_err(|e| e.to_string())?;
    let corpus: Vec<CorpusEntry> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    ensure(corpus.len() >= 30, || format!("only {} elements", corpus.len()))?;
    let mut kinds = HashSet::new();
    let mut chained = false;
    for c in &corpus {
        let plan = PlanDocument { test: "corpus".into(), agent: String::new(), elements: vec![c.element.clone()] };
        let steps = discretize(&plan).map_err(|e| format!("{}: {e}", c.element.id))?;
        ensure(steps.len() == c.expected, || format!("{}: {} steps, expected {}", c.element.id, steps.len(), c.expected))?;
        let kind = c.element.kind.as_ref().ok_or("unclassified element in corpus")?;
        kinds.insert(std::mem::discriminant(kind));
        chained |= matches!(kind, ElementKind::Terminal { .. }) && c.expected > 1;
        if let ElementKind::Email { attachments } = kind {
            let adds = steps.iter().filter(|s| s.kind == StepKind::AttachmentAdd).count();
            ensure(adds == attachments.len(), || format!("{}: {adds} attachment steps", c.element.id))?;
        }
    }
    ensure(kinds.len() == 8 && chained, || "corpus misses a rule".into())?;
    let total: usize = corpus.iter().map(|c| c.expected).sum();
    Ok(format!("{} elements, {total} steps, 0 deviations", corpus.len()))
}

// 3, 4, 5, 7, 8 share the golden suite

fn run_entries(suite: &str, ids: &[&str]) -> Result<Vec<RunRecord>, String> {
    let cfg = SuiteConfig::load(&fixtures().join("suites").join(suite).join("suite.toml")).map_err(|e| e.to_string())?;
    let mut entries = load_features(&cfg.features).map_err(|e| e.to_string())?;
    if !ids.is_empty() {
        entries.retain(|e| ids.contains(&e.feature.id.as_str()));
    }
    let prepared = prepare(&cfg, &entries).map_err(|e| e.to_string())?;
    run_all(&prepared, cfg.jobs).into_iter().map(|r| r.record).collect()
}

fn untouched_under(diff: &EnvDiff, prefix: &str) -> bool {
    diff.added.iter().chain(&diff.removed).chain(&diff.modified).all(|k| !k.starts_with(prefix))
}

fn backup_scenario() -> Check {
    const TARGET: &str = "fs:/home/user/work/projects_backup";
    let mut first: Option<Vec<String>> = None;
    let mut slowest = Duration::ZERO;
    for _ in 0..5 {
        let start = Instant::now();
        let recs = run_entries("golden", &["backup-wrong-path", "backup-nominal"])?;
        slowest = slowest.max(start.elapsed() / 2);
        let bug = &recs[0];
        let bugs = bug.verdict.as_ref().ok_or("no verdict")?.bugs();
        ensure(bugs.len() == 1 && bugs[0].criterion == BugCriterion::CompletionImpact, || format!("bugs {bugs:?}"))?;
        let cites_diff = bugs[0]
            .evidence_refs
            .iter()
            .any(|r| matches!(r, EvidenceRef::Diff { entity, change: DiffChange::Absent } if entity == TARGET));
        let diff = &bug.evidence.as_ref().ok_or("no evidence")?.env_diff;
        ensure(cites_diff && untouched_under(diff, TARGET), || "empty diff for the backup target not cited".into())?;
        let nominal = recs[1].verdict.as_ref().ok_or("no verdict")?;
        ensure(nominal.outcome == Outcome::Pass, || format!("nominal: {:?}", nominal.outcome))?;

        let json: Vec<String> = recs.iter().map(RunRecord::deterministic_json).collect();
        match &first {
            None => first = Some(json),
            Some(f) => ensure(*f == json, || "runs differ".into())?,
        }
    }
    ensure(slowest < Duration::from_secs(10), || format!("slowest run {slowest:?}"))?;
    Ok(format!("1 completion_impact bug, nominal pass, 5 identical runs, slowest {:.3}s", slowest.as_secs_f64()))
}

fn placeholder_scenario() -> Check {
    let recs = run_entries("golden", &["reply-placeholder"])?;
    let rec = &recs[0];
    let bugs = rec.verdict.as_ref().ok_or("no verdict")?.bugs();
    ensure(bugs.len() == 1 && bugs[0].criterion == BugCriterion::QualityImpact, || format!("bugs {bugs:?}"))?;
    let cites = bugs[0].evidence_refs.iter().any(|r| match r {
        EvidenceRef::Finding { contains, .. } | EvidenceRef::Capture { contains, .. } => {
            contains.as_deref() == Some("[your name]")
        }
        _ => false,
    });
    ensure(cites, || "bug does not cite the placeholder text".into())?;
    let findings = &rec.evidence.as_ref().ok_or("no evidence")?.investigator_findings;
    let sent_reply = findings.iter().any(|f| {
        f.query.domain == ProbeDomain::Mail
            && f.query.selector.starts_with("sent")
            && serde_json::to_string(&f.status).is_ok_and(|s| s.contains("[your name]"))
    });
    ensure(sent_reply, || format!("no sent-folder finding in {findings:?}"))?;
    Ok("1 quality_impact bug citing \"[your name]\", sent reply found".into())
}

fn environment_failures() -> Check {
    let recs = run_entries("faults", &[])?;
    ensure(recs.len() == 20, || format!("{} runs", recs.len()))?;
    let report = SuiteReport::from_records(&recs, None);
    ensure(report.environment_failures == 20, || report.render_text())?;
    let bugs: usize = recs.iter().map(|r| r.verdict.as_ref().map_or(0, |v| v.bugs().len())).sum();
    ensure(bugs == 0, || format!("{bugs} bugs"))?;
    for r in &recs {
        let mut per_call: HashMap<&str, u32> = HashMap::new();
        for a in &r.attempts {
            let n = per_call.entry(&a.call_id).or_default();
            *n = (*n).max(a.attempt);
        }
        let budget = r.max_retries;
        ensure(!per_call.is_empty() && per_call.values().any(|&n| n == budget), || {
            format!("{}: attempts {per_call:?}, budget {budget}", r.feature.id)
        })?;
        ensure(per_call.values().all(|&n| n <= budget), || format!("{}: over budget", r.feature.id))?;
    }
    Ok("20 environment failures, 0 bugs, retries at budget in every log".into())
}

// 6

fn blank_region(f: &Frame, row: usize, col: usize, n: usize) -> bool {
    (col..col + n).all(|c| f.cell(row, c) == ' ')
}

fn grid_diff(a: &Frame, b: &Frame) -> BTreeSet<(usize, usize)> {
    let mut d = BTreeSet::new();
    for r in 0..a.rows().max(b.rows()) {
        for c in 0..a.cols().max(b.cols()) {
            if a.cell(r, c) != b.cell(r, c) {
                d.insert((r, c));
            }
        }
    }
    d
}

fn random_word(rng: &mut ChaCha8Rng, alphabet: &[u8], min: usize, max: usize) -> String {
    let len = rng.gen_range(min..=max);
    (0..len).map(|_| *alphabet.choose(rng).unwrap() as char).collect()
}

fn type_cases(rng: &mut ChaCha8Rng) -> Result<(usize, usize), String> {
    let (rows, cols) = (12, 48);
    let (mut oks, mut others) = (0, 0);
    for case in 0..500 {
        let mut t = VirtualTerminal::new(rows, cols);
        for _ in 0..rng.gen_range(0..4) {
            let w = random_word(rng, b"abcxyz:>#", 1, 9);
            t.write_at(rng.gen_range(0..rows), rng.gen_range(0..cols), &w);
        }
        let row = rng.gen_range(0..rows);
        let col = rng.gen_range(0..cols - 4);
        let width = rng.gen_range(1..=(cols - col).min(24));
        let max_len = rng.gen_range(1..=width);
        t.ensure_field(InputField::new("f", row, col, width).with_max_len(max_len));
        if rng.gen_bool(0.3) {
            let v = random_word(rng, b"pq", 0, max_len);
            t.set_field_value("f", &v);
        }
        if rng.gen_bool(0.85) {
            t.set_focus(Some("f"));
        }
        let text = random_word(rng, b"abcdefghijklmnopqrstuvwxyz0123456789-_.", 1, 13);

        let pre = t.frame().map_err(|e| e.to_string())?;
        let cursor = t.cursor();
        let focused = t.focus().is_some();
        let r = type_verified(&mut t, &text).map_err(|e| e.to_string())?;
        let post = t.frame().map_err(|e| e.to_string())?;

        let expect_ok = focused
            && cursor.is_some_and(|(cr, cc)| {
                let n = text.chars().count();
                let region: BTreeSet<(usize, usize)> = (cc..cc + n).map(|c| (cr, c)).collect();
                let d = grid_diff(&pre, &post);
                let spelled: String = (cc..cc + n).map(|c| post.cell(cr, c)).collect();
                !d.is_empty() && d.is_subset(&region) && spelled == text && blank_region(&pre, cr, cc, n)
            });
        let is_ok = r == TypeResult::Ok;
        ensure(is_ok == expect_ok, || format!("type case {case}: {text:?} gave {r:?}, oracle says ok={expect_ok}"))?;
        if !focused {
            ensure(pre == post, || format!("type case {case}: screen changed without focus"))?;
        }
        if is_ok {
            oks += 1;
        } else {
            others += 1;
        }
    }
    Ok((oks, others))
}

/// Records clicks instead of performing them.
struct ClickProbe {
    frame: Frame,
    clicks: Vec<(usize, usize)>,
}

impl ScreenBackend for ClickProbe {
    fn frame(&self) -> Result<Frame, ScreenError> {
        Ok(self.frame.clone())
    }
    fn focus(&self) -> Option<String> {
        None
    }
    fn cursor(&self) -> Option<(usize, usize)> {
        None
    }
    fn send_text(&mut self, _: &str) -> Result<(), ScreenError> {
        Ok(())
    }
    fn click_at(&mut self, row: usize, col: usize) -> Result<(), ScreenError> {
        self.clicks.push((row, col));
        Ok(())
    }
    fn press_key(&mut self, _: &str) -> Result<(), ScreenError> {
        Ok(())
    }
}

fn row_major_matches(f: &Frame, target: &str) -> Vec<(usize, usize)> {
    let t: Vec<char> = target.chars().collect();
    let mut out = Vec::new();
    for r in 0..f.rows() {
        let mut free = 0;
        for c in 0..f.cols() {
            if c >= free && (0..t.len()).all(|i| f.cell(r, c + i) == t[i]) && c + t.len() <= f.cols() {
                out.push((r, c));
                free = c + t.len();
            }
        }
    }
    out
}

fn nth_cases(rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let mut hits = 0;
    for case in 0..200 {
        let rows = rng.gen_range(1..10);
        let cols = rng.gen_range(4..30);
        let cells: Vec<Vec<char>> =
            (0..rows).map(|_| (0..cols).map(|_| *b"ab  ".choose(rng).unwrap() as char).collect()).collect();
        let frame = Frame::from_cells(cells);
        let target = ["ab", "a", "aba", "b b"].choose(rng).unwrap();
        let expected = row_major_matches(&frame, target);
        let k = rng.gen_range(1..=expected.len() + 1);
        let mut probe = ClickProbe { frame: frame.clone(), clicks: Vec::new() };
        let r = agentprobe::ui::click_text(&mut probe, target, Some(&PositionHint::nth(k))).map_err(|e| e.to_string())?;
        match (expected.get(k - 1), &r) {
            (Some(&(row, col)), ClickResult::Ok { span, .. }) => {
                ensure((span.row, span.col_start) == (row, col) && probe.clicks == [(row, col)], || {
                    format!("nth case {case}: {target:?} #{k} at {:?}, expected {:?}", (span.row, span.col_start), (row, col))
                })?;
                hits += 1;
            }
            (None, ClickResult::NotFound) => ensure(probe.clicks.is_empty(), || format!("nth case {case}: clicked"))?,
            (e, got) => return Err(format!("nth case {case}: {target:?} #{k}: expected {e:?}, got {got:?}")),
        }
        let resolved = resolve_target(&frame, target, Some(&PositionHint::nth(k))).map_err(|e| e.to_string())?;
        ensure(resolved == r, || format!("nth case {case}: resolve and click disagree"))?;
    }
    Ok(hits)
}

fn dedup_cases(rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let mut captured = 0;
    for case in 0..100 {
        let pool: Vec<Frame> = (0..rng.gen_range(1..4))
            .map(|_| Frame::from_text(3, 8, &random_word(rng, b"xy.", 6, 6)))
            .collect();
        let baseline = pool.choose(rng).unwrap().clone();
        let seq: Vec<Frame> = (0..rng.gen_range(0..25)).map(|_| pool.choose(rng).unwrap().clone()).collect();
        let closed = rng.gen_bool(0.3);

        let mut reference = Vec::new();
        let mut last = &baseline;
        for (i, f) in seq.iter().enumerate() {
            if f != last {
                reference.push((i as f64, f.clone()));
                last = f;
            }
        }

        let mut feed = seq.iter().enumerate();
        let w = watch_changes(baseline.clone(), || match feed.next() {
            Some((i, f)) => FramePoll::Frame(i as f64, f.clone()),
            None if closed => FramePoll::Closed,
            None => FramePoll::Done,
        });
        let got: Vec<(f64, Frame)> = w.captures.iter().map(|c| (c.timestamp, c.frame.clone())).collect();
        ensure(got == reference && w.truncated == closed, || format!("dedup case {case}"))?;
        let seqs: Vec<u64> = w.captures.iter().map(|c| c.seq).collect();
        ensure(seqs == (1..=seqs.len() as u64).collect::<Vec<_>>(), || format!("dedup case {case}: seq {seqs:?}"))?;
        captured += got.len();
    }
    Ok(captured)
}

fn ui_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (oks, others) = type_cases(&mut rng)?;
    ensure(oks > 50 && others > 50, || format!("unbalanced type cases: {oks} ok, {others} not"))?;
    let hits = nth_cases(&mut rng)?;
    let caps = dedup_cases(&mut rng)?;
    Ok(format!("type 500 ({oks} ok), nth 200 ({hits} hits), dedup 100 ({caps} captures)"))
}

// 7

/// Fails the check if a gated call ever reaches it.
struct Unreachable(usize);

impl ToolHost for Unreachable {
    fn invoke(&mut self, _: &ToolCall) -> ToolOutcome {
        self.0 += 1;
        ToolOutcome::Ok { observation: String::new(), payload: serde_json::Value::Null }
    }
}

fn step(id: &str) -> SetupStep {
    SetupStep { id: id.into(), intent: "a folder".into(), target: SetupTarget::FileSystem, provides: vec!["x".into()], tool: None }
}

fn oracle(id: &str) -> Oracle {
    Oracle {
        id: id.into(),
        description: "x exists".into(),
        check_kind: CheckKind::ScreenEvidence,
        probe: None,
        references: vec!["x".into()],
        generalizability_note: String::new(),
    }
}

fn isolation_and_gates() -> Check {
    let platforms = [Platform::Cli, Platform::WebApp, Platform::BrowserExtension, Platform::Desktop];
    let mut names: BTreeSet<String> = ["rm_rf", "shell", "", "read_file"].iter().map(|s| s.to_string()).collect();
    for role in SpecialistRole::ALL {
        for p in platforms {
            names.extend(registry_for(role, p).names().into_iter().map(String::from));
        }
    }
    let mut host = Unreachable(0);
    let (mut denied, mut allowed) = (0, 0);
    for role in SpecialistRole::ALL {
        for p in platforms {
            let reg = registry_for(role, p);
            for tool in &names {
                let r = dispatch(&reg, &mut host, &ToolCall::new("c", tool, serde_json::json!({})));
                let unknown = r.status == ToolStatus::FatalError(FatalKind::UnknownTool);
                ensure(unknown != reg.contains(tool), || format!("{role} on {p:?}: {tool} gave {:?}", r.status))?;
                if unknown {
                    denied += 1;
                } else {
                    allowed += 1;
                }
            }
        }
    }
    ensure(host.0 <= allowed, || "a denied call reached the host".into())?;

    let feature = FeatureDescription::new("f", FeatureDomain::FileSystem, "Back up a folder.");
    let agent = AgentSpecification { name: "a".into(), platform: Platform::Cli, launch: vec!["agent".into()], docs: String::new() };
    let spec = new_specification(&feature, &agent).map_err(|e| e.to_string())?;
    let spec = revise_specification(
        &spec,
        SpecialistRole::TestArchitect,
        &RevisionDelta::new("draft").edit(SpecEdit::AddSetupStep { step: step("s1") }).edit(SpecEdit::AddOracle { oracle: oracle("o1") }),
    )
    .map_err(|e| e.to_string())?;
    let deltas = [
        RevisionDelta::new("empty"),
        RevisionDelta::new("add").edit(SpecEdit::AddSetupStep { step: step("s2") }),
        RevisionDelta::new("remove").edit(SpecEdit::RemoveSetupStep { id: "s1".into() }),
        RevisionDelta::new("replace").edit(SpecEdit::ReplaceSetupStep { step: step("s1") }),
        RevisionDelta::new("prompt").edit(SpecEdit::SetPrompt { text: "Back up x.".into(), requires: None, introduces: None }),
        RevisionDelta::new("oracle").edit(SpecEdit::AddOracle { oracle: oracle("o2") }),
        RevisionDelta::new("drop oracle").edit(SpecEdit::RemoveOracle { id: "o1".into() }),
        RevisionDelta::new("swap oracle").edit(SpecEdit::ReplaceOracle { oracle: oracle("o1") }),
    ];
    let mut rejected = 0;
    for role in [SpecialistRole::Engineer, SpecialistRole::Investigator, SpecialistRole::Judge] {
        for d in &deltas {
            ensure(revise_specification(&spec, role, d).is_err(), || format!("{role} revised with `{}`", d.description))?;
            rejected += 1;
        }
    }

    let recs = run_entries("golden", &[])?;
    for r in &recs {
        let order: Vec<Phase> = r.phases.iter().map(|p| p.phase).collect();
        ensure(order == Phase::ALL, || format!("{}: phases {order:?}", r.feature.id))?;
        for w in r.phases.windows(2) {
            ensure(w[1].spec_in == w[0].spec_out, || format!("{}: snapshot not threaded", r.feature.id))?;
        }
        for role in SpecialistRole::ALL {
            let reg = registry_for(role, r.agent.platform);
            ensure(r.tools_used_by(role).iter().all(|t| reg.contains(t)), || format!("{}: {role} escaped", r.feature.id))?;
        }
    }
    Ok(format!("{denied} pairs denied, {allowed} allowed, {rejected} revisions rejected, {} golden runs threaded", recs.len()))
}

// 8

fn sums(entries: &[LedgerEntry], key: impl Fn(&LedgerEntry) -> String) -> HashMap<String, (u64, u64)> {
    let mut m: HashMap<String, (u64, u64)> = HashMap::new();
    for e in entries {
        let s = m.entry(key(e)).or_default();
        s.0 += e.usage.input_tokens;
        s.1 += e.usage.output_tokens;
    }
    m
}

fn ledger_conservation() -> Check {
    let recs = run_entries("golden", &[])?;
    for r in &recs {
        let l = &r.ledger;
        let total = l.total();
        let by_role: TokenUsage = l.by_role().values().copied().sum();
        let by_phase: TokenUsage = l.by_phase().values().copied().sum();
        let raw: (u64, u64) = l.entries().iter().fold((0, 0), |a, e| (a.0 + e.usage.input_tokens, a.1 + e.usage.output_tokens));
        ensure(by_role == total && by_phase == total && raw == (total.input_tokens, total.output_tokens), || {
            format!("{}: totals disagree", r.feature.id)
        })?;
        let exchanges: (u64, u64) =
            r.exchanges.iter().fold((0, 0), |a, x| (a.0 + x.response.usage.input_tokens, a.1 + x.response.usage.output_tokens));
        ensure(exchanges == raw, || format!("{}: ledger {raw:?} vs exchanges {exchanges:?}", r.feature.id))?;
        let roles = sums(l.entries(), |e| e.role.to_string());
        for (role, u) in l.by_role() {
            ensure(roles[&role.to_string()] == (u.input_tokens, u.output_tokens), || format!("{role} sum"))?;
        }
        let phases = sums(l.entries(), |e| format!("{:?}", e.phase));
        for (phase, u) in l.by_phase() {
            ensure(phases[&format!("{phase:?}")] == (u.input_tokens, u.output_tokens), || format!("{phase:?} sum"))?;
        }
    }
    let pricing: PricingTable =
        serde_json::from_str(&std::fs::read_to_string(fixtures().join("pricing.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    // mean tokens per test for one agent row of the published cost table
    let mut row = TokenLedger::default();
    row.record(SpecialistRole::Engineer, Phase::Execution, TokenUsage::new(97_900, 8_400));
    let cost = cost_estimate(&row, &pricing).map_err(|e| e.to_string())?;
    ensure((cost - 0.42).abs() <= 0.01, || format!("row cost {cost}"))?;
    let run_cost = cost_estimate(&recs[0].ledger, &pricing).map_err(|e| e.to_string())?;
    ensure((run_cost - 0.42).abs() <= 0.01, || format!("backup run cost {run_cost}"))?;
    Ok(format!("{} runs conserved, row cost ${cost:.4}, backup run ${run_cost:.4}", recs.len()))
}

//! Per-agent and total tables for one tester system.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{
    bug_confusion, discretize, fmt_metric, fmt_pct, fmt_ratio, hallucination_report, score_execution, score_planning,
    AnnotationSet, BugConfusion, HallucinationCategory, HallucinationReport, MetricsError, PhaseExecution,
    PhasePlanning, StepPhase, UNANNOTATED,
};
use crate::llm::ledger::{PricingTable, TokenUsage};
use crate::pipeline::record::RunSummary;

const TABLE_PHASES: [StepPhase; 3] = [StepPhase::Setup, StepPhase::Execution, StepPhase::Validation];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMetrics {
    pub agent: String,
    pub tests: usize,
    pub steps: BTreeMap<StepPhase, usize>,
    /// `None` when no step was annotated.
    pub planning: Option<BTreeMap<StepPhase, PhasePlanning>>,
    pub execution: Option<BTreeMap<StepPhase, PhaseExecution>>,
    /// Bug counts over tests whose prompt was delivered.
    pub bugs: Option<BugConfusion>,
    /// Tests whose prompt never arrived.
    pub unsuccessful_tests: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub agent: String,
    pub tests: usize,
    pub mean_runtime_secs: f64,
    pub mean_input_tokens: f64,
    pub mean_output_tokens: f64,
    pub mean_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteMetrics {
    pub system: String,
    pub agents: Vec<AgentMetrics>,
    pub total: AgentMetrics,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub hallucinations: HallucinationReport,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cost: Vec<CostRow>,
}

fn test_of(step: &str) -> &str {
    step.split(':').next().unwrap_or(step)
}

/// Splits `set` by agent and scores each slice plus the whole.
pub fn build_suite_metrics(
    system: &str,
    set: &AnnotationSet,
    runs: &[RunSummary],
    pricing: Option<&PricingTable>,
) -> Result<SuiteMetrics, MetricsError> {
    let mut order: Vec<String> = Vec::new();
    let mut note = |a: &str| {
        if !order.iter().any(|o| o == a) {
            order.push(a.to_string());
        }
    };
    set.plans.iter().for_each(|p| note(&p.agent));
    set.tests.iter().for_each(|t| note(&t.agent));
    set.bugs.iter().for_each(|b| note(&b.agent));

    let agent_of_test: HashMap<&str, &str> = set
        .plans
        .iter()
        .map(|p| (p.test.as_str(), p.agent.as_str()))
        .chain(set.tests.iter().map(|t| (t.test.as_str(), t.agent.as_str())))
        .collect();

    let mut warnings = Vec::new();
    let mut agents = Vec::new();
    for a in &order {
        let plans: Vec<_> = set.plans.iter().filter(|p| &p.agent == a).cloned().collect();
        let steps_ann: Vec<_> = set
            .steps
            .iter()
            .filter(|s| agent_of_test.get(test_of(&s.step)).is_some_and(|x| x == a))
            .cloned()
            .collect();
        let sub = AnnotationSet {
            plans,
            steps: steps_ann,
            tests: set.tests.iter().filter(|t| &t.agent == a).cloned().collect(),
            bugs: set.bugs.iter().filter(|b| &b.agent == a).cloned().collect(),
            hallucinations: Vec::new(),
        };
        agents.push(score_slice(a, &sub, &mut warnings)?);
    }
    let all = AnnotationSet { hallucinations: Vec::new(), ..set.clone() };
    let total = score_slice("Total", &all, &mut Vec::new())?;
    Ok(SuiteMetrics {
        system: system.to_string(),
        agents,
        total,
        warnings,
        hallucinations: hallucination_report(&set.hallucinations),
        cost: cost_rows(runs, pricing),
    })
}

fn score_slice(agent: &str, set: &AnnotationSet, warnings: &mut Vec<String>) -> Result<AgentMetrics, MetricsError> {
    let mut steps = Vec::new();
    for p in &set.plans {
        steps.extend(discretize(p)?);
    }
    let mut counts: BTreeMap<StepPhase, usize> = StepPhase::ALL.iter().map(|p| (*p, 0)).collect();
    for s in &steps {
        *counts.entry(s.phase).or_default() += 1;
    }
    let (planning, execution) = if set.steps.is_empty() {
        (None, None)
    } else {
        match score_execution(&steps, &set.steps) {
            Ok(e) => {
                warnings.extend(e.warnings);
                (Some(score_planning(&steps, &set.steps)?), Some(e.phases))
            }
            // partially annotated: leave the gap visible
            Err(MetricsError::IncompleteAnnotation { step }) => {
                warnings.push(format!("{agent}: step `{step}` has no annotation"));
                (None, None)
            }
            Err(e) => return Err(e),
        }
    };
    let tests = if set.tests.is_empty() { set.plans.len() } else { set.tests.len() };
    let unlabeled = set.tests.iter().filter(|t| !t.bugs_labeled).count();
    let bugs = if unlabeled > 0 {
        if unlabeled < set.tests.len() {
            warnings.push(format!("{agent}: {unlabeled} tests have no bug labels"));
        }
        None
    } else {
        (!set.tests.is_empty() || !set.bugs.is_empty()).then(|| bug_confusion(&set.bugs, &set.tests))
    };
    Ok(AgentMetrics {
        agent: agent.to_string(),
        tests,
        steps: counts,
        planning,
        execution,
        unsuccessful_tests: set.tests.iter().filter(|t| !t.prompt_successful).count(),
        bugs,
    })
}

/// Mean runtime, tokens and cost per test, grouped by agent in order of
/// first appearance.
pub fn cost_rows(runs: &[RunSummary], pricing: Option<&PricingTable>) -> Vec<CostRow> {
    let mut order: Vec<&str> = Vec::new();
    for r in runs {
        if !order.contains(&r.agent.as_str()) {
            order.push(&r.agent);
        }
    }
    order
        .into_iter()
        .map(|a| {
            let rs: Vec<_> = runs.iter().filter(|r| r.agent == a).collect();
            let n = rs.len() as f64;
            let usage: TokenUsage = rs.iter().map(|r| TokenUsage::new(r.input_tokens, r.output_tokens)).sum();
            CostRow {
                agent: a.to_string(),
                tests: rs.len(),
                mean_runtime_secs: rs.iter().map(|r| r.wall_clock_secs).sum::<f64>() / n,
                mean_input_tokens: usage.input_tokens as f64 / n,
                mean_output_tokens: usage.output_tokens as f64 / n,
                mean_cost: pricing.map(|p| p.cost(usage) / n),
            }
        })
        .collect()
}

fn kilo(v: f64) -> String {
    format!("{:.1}K", v / 1000.0)
}

/// Columns padded to their widest cell; the first column left-aligned.
fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let n = headers.len();
    let mut w: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate().take(n) {
            w[i] = w[i].max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i == 0 {
                s.push_str(&format!("{c:<width$}", width = w[i]));
            } else {
                s.push_str(&format!("  {c:>width$}", width = w[i]));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(headers.to_vec());
    out.push_str(&"-".repeat(w.iter().sum::<usize>() + 2 * (n - 1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

fn rows_with_total(m: &SuiteMetrics) -> impl Iterator<Item = &AgentMetrics> {
    m.agents.iter().chain(std::iter::once(&m.total))
}

fn steps_table(m: &SuiteMetrics) -> String {
    let rows: Vec<Vec<String>> = rows_with_total(m)
        .map(|a| {
            let mut r = vec![a.agent.clone(), a.tests.to_string()];
            let mut sum = 0;
            for p in TABLE_PHASES {
                let n = a.steps[&p];
                sum += n;
                r.push(if n == 0 { "-".into() } else { n.to_string() });
            }
            r.push(sum.to_string());
            r
        })
        .collect();
    table(&["Agent", "Tests", "Setup", "Execution", "Validation", "Sum"], &rows)
}

fn planning_table(m: &SuiteMetrics) -> String {
    let rows: Vec<Vec<String>> = rows_with_total(m)
        .map(|a| {
            let mut r = vec![a.agent.clone()];
            for p in TABLE_PHASES {
                match &a.planning {
                    None => r.extend([UNANNOTATED.to_string(), UNANNOTATED.into(), UNANNOTATED.into()]),
                    Some(pl) if pl[&p].total == 0 && pl[&p].missing == 0 => r.extend(["-".to_string(), "-".into(), "-".into()]),
                    Some(pl) => {
                        let x = pl[&p];
                        r.extend([x.incorrect.to_string(), fmt_pct(x.incorrect_pct()), x.missing.to_string()]);
                    }
                }
            }
            r
        })
        .collect();
    table(&["Agent", "Setup #I", "%I", "#M", "Execution #I", "%I", "#M", "Validation #I", "%I", "#M"], &rows)
}

fn execution_table(m: &SuiteMetrics) -> String {
    let rows: Vec<Vec<String>> = rows_with_total(m)
        .map(|a| {
            let mut r = vec![a.agent.clone()];
            for p in TABLE_PHASES {
                r.push(a.execution.as_ref().map_or_else(|| UNANNOTATED.to_string(), |e| fmt_ratio(&e[&p])));
            }
            r
        })
        .collect();
    table(&["Agent", "Setup", "Execution", "Validation"], &rows)
}

fn bug_table(m: &SuiteMetrics) -> String {
    let mut rows = Vec::new();
    for a in rows_with_total(m) {
        let Some(b) = &a.bugs else {
            rows.push(vec![a.agent.clone(), "Sum".into(), a.tests.to_string(), "?".into(), "?".into(), "?".into()]);
            continue;
        };
        let sp = a.tests - a.unsuccessful_tests;
        if a.agent != "Total" {
            rows.push(vec![
                a.agent.clone(),
                "SP".into(),
                sp.to_string(),
                b.tp.to_string(),
                b.fp.to_string(),
                b.fn_.to_string(),
            ]);
            rows.push(vec![
                String::new(),
                "UP".into(),
                a.unsuccessful_tests.to_string(),
                "-".into(),
                b.excluded_fps.to_string(),
                "-".into(),
            ]);
        }
        rows.push(vec![
            if a.agent == "Total" { a.agent.clone() } else { String::new() },
            "Sum".into(),
            a.tests.to_string(),
            b.tp.to_string(),
            b.total_fp().to_string(),
            b.fn_.to_string(),
        ]);
    }
    table(&["Agent", "Case", "Tests", "TP", "FP", "FN"], &rows)
}

fn aggregate_table(ms: &[&SuiteMetrics]) -> String {
    let mut headers = vec![""];
    headers.extend(ms.iter().map(|m| m.system.as_str()));
    let cell = |f: &dyn Fn(&BugConfusion) -> String| -> Vec<String> {
        ms.iter().map(|m| m.total.bugs.as_ref().map_or_else(|| UNANNOTATED.to_string(), f)).collect()
    };
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut row = |label: &str, cells: Vec<String>| {
        let mut r = vec![label.to_string()];
        r.extend(cells);
        rows.push(r);
    };
    row("PSR", cell(&|b| fmt_pct(b.psr())));
    row("Bugs triggered", cell(&|b| b.bugs_triggered().to_string()));
    row("Precision", cell(&|b| fmt_metric(b.precision())));
    row("Recall", cell(&|b| fmt_metric(b.recall())));
    row("F1 Score", cell(&|b| fmt_metric(b.f1())));
    table(&headers, &rows)
}

fn hallucination_table(ms: &[&SuiteMetrics]) -> String {
    let mut headers = vec!["Category"];
    headers.extend(ms.iter().map(|m| m.system.as_str()));
    let mut rows: Vec<Vec<String>> = HallucinationCategory::ALL
        .iter()
        .map(|c| {
            let mut r = vec![c.label().to_string()];
            r.extend(ms.iter().map(|m| m.hallucinations.by_category[c].to_string()));
            r
        })
        .collect();
    let mut total = vec!["Total".to_string()];
    total.extend(ms.iter().map(|m| m.hallucinations.total.to_string()));
    rows.push(total);
    table(&headers, &rows)
}

fn cost_table(rows: &[CostRow]) -> String {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|c| {
            vec![
                c.agent.clone(),
                format!("{:.0}", c.mean_runtime_secs),
                kilo(c.mean_input_tokens),
                kilo(c.mean_output_tokens),
                c.mean_cost.map_or_else(|| "-".into(), |v| format!("{v:.2}")),
            ]
        })
        .collect();
    table(&["Agent", "Runtime (s)", "Input Tokens", "Output Tokens", "Cost ($)"], &rows)
}

/// Plain-text tables: one block per system, then the aggregate bug and
/// hallucination comparisons across all of them.
pub fn render_text(ms: &[SuiteMetrics]) -> String {
    let mut out = String::new();
    for m in ms {
        out.push_str(&format!("== {} ==\n\n", m.system));
        out.push_str("Discretized steps\n");
        out.push_str(&steps_table(m));
        out.push_str("\nPlanning: incorrect (#I, %I) and missing (#M) steps\n");
        out.push_str(&planning_table(m));
        out.push_str("\nExecution success\n");
        out.push_str(&execution_table(m));
        out.push_str("\nBug detection (SP: successful prompt, UP: unsuccessful prompt)\n");
        out.push_str(&bug_table(m));
        if !m.cost.is_empty() {
            out.push_str("\nMean time, tokens and cost per test\n");
            out.push_str(&cost_table(&m.cost));
        }
        for w in &m.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out.push('\n');
    }
    let refs: Vec<&SuiteMetrics> = ms.iter().collect();
    if !refs.is_empty() {
        out.push_str("Aggregate bug detection\n");
        out.push_str(&aggregate_table(&refs));
        out.push_str("\nHallucinations by type\n");
        out.push_str(&hallucination_table(&refs));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{ElementKind, PlanDocument, PlanElement, StepAnnotation, TestPrompt};

    fn plan(test: &str, agent: &str, n_setup: usize) -> PlanDocument {
        let mut elements = vec![PlanElement {
            id: "run".into(),
            phase: StepPhase::Execution,
            kind: Some(ElementKind::Navigation { transitions: vec!["open".into(), "type".into()] }),
        }];
        if n_setup > 0 {
            elements.push(PlanElement {
                id: "mail".into(),
                phase: StepPhase::Setup,
                kind: Some(ElementKind::Email { attachments: vec![] }),
            });
        }
        PlanDocument { test: test.into(), agent: agent.into(), elements }
    }

    #[test]
    fn per_agent_and_total() {
        let mut set = AnnotationSet {
            plans: vec![plan("t1", "A", 1), plan("t2", "B", 0)],
            ..Default::default()
        };
        for p in &set.plans {
            for s in discretize(p).unwrap() {
                set.steps.push(StepAnnotation::ok(s.id));
            }
        }
        set.steps.push(StepAnnotation::missing("t2:check", StepPhase::Validation));
        set.tests = vec![
            TestPrompt { test: "t1".into(), agent: "A".into(), prompt_successful: true, bugs_labeled: true },
            TestPrompt { test: "t2".into(), agent: "B".into(), prompt_successful: false, bugs_labeled: true },
        ];
        let m = build_suite_metrics("S", &set, &[], None).unwrap();
        assert_eq!(m.agents.len(), 2);
        assert_eq!(m.agents[0].steps[&StepPhase::Setup], 4);
        assert_eq!(m.agents[1].steps[&StepPhase::Setup], 0);
        assert_eq!(m.agents[1].planning.as_ref().unwrap()[&StepPhase::Validation].missing, 1);
        assert_eq!(m.total.steps[&StepPhase::Execution], 4);
        assert_eq!(m.total.bugs.as_ref().unwrap().psr(), Some(50.0));
        let text = render_text(&[m]);
        assert!(text.contains("100.0% (4/4)"), "{text}");
        assert!(text.contains("--"));
    }

    #[test]
    fn unannotated_shows_question_mark() {
        let set = AnnotationSet { plans: vec![plan("t1", "A", 0)], ..Default::default() };
        let m = build_suite_metrics("S", &set, &[], None).unwrap();
        assert!(m.total.planning.is_none());
        let text = render_text(&[m]);
        assert!(text.contains(UNANNOTATED));
    }

    #[test]
    fn mixed_annotation_marks_gaps() {
        let mut set = AnnotationSet { plans: vec![plan("t1", "A", 0), plan("t2", "B", 0)], ..Default::default() };
        for s in discretize(&set.plans[0]).unwrap() {
            set.steps.push(StepAnnotation::ok(s.id));
        }
        let m = build_suite_metrics("S", &set, &[], None).unwrap();
        assert!(m.agents[0].planning.is_some());
        assert!(m.agents[1].planning.is_none());
        assert!(m.total.planning.is_none());
        let text = render_text(&[m]);
        assert!(text.contains("100.0% (2/2)") && text.contains(UNANNOTATED), "{text}");
    }

    #[test]
    fn cost_row_matches_token_figures() {
        let run = RunSummary {
            feature_id: "f".into(),
            agent: "OI".into(),
            outcome: "bugs".into(),
            bugs: 1,
            prompt_delivered: true,
            input_tokens: 97_900,
            output_tokens: 8_400,
            responses: 12,
            wall_clock_secs: 299.0,
            error: None,
        };
        let p = PricingTable { input_per_million: 3.0, output_per_million: 15.0 };
        let rows = cost_rows(&[run], Some(&p));
        let t = cost_table(&rows);
        assert!(t.contains("97.9K") && t.contains("8.4K") && t.contains("0.42") && t.contains("299"), "{t}");
    }
}

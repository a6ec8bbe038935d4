//! Planning and execution scores from step annotations.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::steps::{DiscretizedStep, StepPhase};
use super::MetricsError;

fn yes() -> bool {
    true
}

/// An annotator's verdict on one step, or on a step the plan should have had.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepAnnotation {
    pub step: String,
    /// Required for `missing` entries, which have no discretized step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<StepPhase>,
    #[serde(default = "yes")]
    pub planned_correct: bool,
    #[serde(default)]
    pub missing: bool,
    #[serde(default = "yes")]
    pub executed_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dependency: Option<String>,
}

impl StepAnnotation {
    pub fn ok(step: impl Into<String>) -> Self {
        StepAnnotation {
            step: step.into(),
            phase: None,
            planned_correct: true,
            missing: false,
            executed_ok: true,
            dependency: None,
        }
    }

    pub fn missing(step: impl Into<String>, phase: StepPhase) -> Self {
        StepAnnotation { phase: Some(phase), missing: true, executed_ok: false, ..StepAnnotation::ok(step) }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhasePlanning {
    pub total: usize,
    pub incorrect: usize,
    pub missing: usize,
}

impl PhasePlanning {
    /// Share of discretized steps planned incorrectly; `None` for an empty
    /// phase.
    pub fn incorrect_pct(&self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.incorrect as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseExecution {
    pub ok: usize,
    pub total: usize,
}

impl PhaseExecution {
    /// `None` when the phase had no steps.
    pub fn ratio(&self) -> Option<f64> {
        (self.total > 0).then(|| self.ok as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionScore {
    pub phases: BTreeMap<StepPhase, PhaseExecution>,
    /// Steps marked executed whose predecessor failed.
    pub warnings: Vec<String>,
}

struct Indexed<'a> {
    by_step: HashMap<&'a str, &'a StepAnnotation>,
    missing: Vec<&'a StepAnnotation>,
}

fn index<'a>(steps: &[DiscretizedStep], ann: &'a [StepAnnotation]) -> Result<Indexed<'a>, MetricsError> {
    let known: HashMap<&str, StepPhase> = steps.iter().map(|s| (s.id.as_str(), s.phase)).collect();
    let mut by_step = HashMap::new();
    let mut missing = Vec::new();
    for a in ann {
        if a.missing {
            if a.phase.is_none() {
                return Err(MetricsError::InvalidAnnotation(format!("missing step `{}` has no phase", a.step)));
            }
            missing.push(a);
            continue;
        }
        if !known.contains_key(a.step.as_str()) {
            return Err(MetricsError::InvalidAnnotation(format!("unknown step `{}`", a.step)));
        }
        if by_step.insert(a.step.as_str(), a).is_some() {
            return Err(MetricsError::InvalidAnnotation(format!("step `{}` annotated twice", a.step)));
        }
    }
    if let Some(s) = steps.iter().find(|s| !by_step.contains_key(s.id.as_str())) {
        return Err(MetricsError::IncompleteAnnotation { step: s.id.clone() });
    }
    Ok(Indexed { by_step, missing })
}

fn empty_phases<T: Default>() -> BTreeMap<StepPhase, T> {
    StepPhase::ALL.iter().map(|p| (*p, T::default())).collect()
}

/// Incorrect and missing counts per phase. Every discretized step must be
/// annotated; missing entries are counted on top of the plan.
pub fn score_planning(
    steps: &[DiscretizedStep],
    annotations: &[StepAnnotation],
) -> Result<BTreeMap<StepPhase, PhasePlanning>, MetricsError> {
    let idx = index(steps, annotations)?;
    let mut out = empty_phases::<PhasePlanning>();
    for s in steps {
        let p = out.entry(s.phase).or_default();
        p.total += 1;
        if !idx.by_step[s.id.as_str()].planned_correct {
            p.incorrect += 1;
        }
    }
    for m in idx.missing {
        if let Some(ph) = m.phase {
            out.entry(ph).or_default().missing += 1;
        }
    }
    Ok(out)
}

/// Executed-ok ratio per phase after failing every step whose dependency
/// chain contains a failure.
pub fn score_execution(steps: &[DiscretizedStep], annotations: &[StepAnnotation]) -> Result<ExecutionScore, MetricsError> {
    let idx = index(steps, annotations)?;
    for a in idx.by_step.values() {
        if let Some(d) = &a.dependency {
            if !idx.by_step.contains_key(d.as_str()) {
                return Err(MetricsError::InvalidAnnotation(format!(
                    "step `{}` depends on unknown step `{d}`",
                    a.step
                )));
            }
        }
    }
    let mut effective: HashMap<&str, bool> = HashMap::new();
    let mut warnings = Vec::new();
    for s in steps {
        resolve(s.id.as_str(), &idx.by_step, &mut effective)?;
    }
    let mut out = ExecutionScore { phases: empty_phases(), warnings: Vec::new() };
    for s in steps {
        let a = idx.by_step[s.id.as_str()];
        let ok = effective[s.id.as_str()];
        if a.executed_ok && !ok {
            warnings.push(format!(
                "step `{}` marked executed but depends on failed `{}`; counted as failed",
                s.id,
                a.dependency.as_deref().unwrap_or_default()
            ));
        }
        let p = out.phases.entry(s.phase).or_default();
        p.total += 1;
        p.ok += usize::from(ok);
    }
    out.warnings = warnings;
    Ok(out)
}

fn resolve<'a>(
    start: &'a str,
    by_step: &HashMap<&'a str, &'a StepAnnotation>,
    effective: &mut HashMap<&'a str, bool>,
) -> Result<bool, MetricsError> {
    let mut chain: Vec<&'a str> = Vec::new();
    let mut cur = start;
    let base = loop {
        if let Some(v) = effective.get(cur) {
            break *v;
        }
        if chain.contains(&cur) {
            return Err(MetricsError::InvalidAnnotation(format!("dependency cycle through `{cur}`")));
        }
        chain.push(cur);
        match by_step[cur].dependency.as_deref() {
            Some(d) => cur = by_step.get_key_value(d).map(|(k, _)| *k).unwrap_or(d),
            None => break true,
        }
    };
    let mut ok = base;
    for s in chain.into_iter().rev() {
        ok = ok && by_step[s].executed_ok;
        effective.insert(s, ok);
    }
    Ok(effective[start])
}

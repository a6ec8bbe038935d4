use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SpecSnapshot;
use crate::tools::catalog;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoherenceViolation {
    /// Oracle names an entity neither the setup nor the prompt introduces.
    OracleReferencesUnknownEntity { oracle_id: String, entity: String },
    /// Prompt relies on data no setup step creates.
    PromptRequiresMissingData { entity: String },
    /// Two oracles share an id; one entry per colliding pair.
    DuplicateOracleId { id: String, first: usize, second: usize },
    /// Setup step planned around a tool the Infrastructure Manager lacks.
    SetupToolUnavailable { step_id: String, tool: String },
}

impl CoherenceViolation {
    /// Names (entity keys, oracle ids, step ids) the violation is about.
    pub fn subjects(&self) -> Vec<&str> {
        match self {
            CoherenceViolation::OracleReferencesUnknownEntity { oracle_id, entity } => {
                vec![oracle_id, entity]
            }
            CoherenceViolation::PromptRequiresMissingData { entity } => vec![entity],
            CoherenceViolation::DuplicateOracleId { id, .. } => vec![id],
            CoherenceViolation::SetupToolUnavailable { step_id, tool } => vec![step_id, tool],
        }
    }
}

/// Lists every coherence problem in `spec`. Pure; an empty list means the
/// specification is coherent.
pub fn coherence_check(spec: &SpecSnapshot) -> Vec<CoherenceViolation> {
    let provided: BTreeSet<&str> = spec
        .setup_steps
        .iter()
        .flat_map(|s| s.provides.iter().map(String::as_str))
        .collect();
    let known: BTreeSet<&str> = provided
        .iter()
        .copied()
        .chain(spec.prompt_introduces.iter().map(String::as_str))
        .collect();

    let mut out = Vec::new();
    for o in &spec.oracles {
        for e in &o.references {
            if !known.contains(e.as_str()) {
                out.push(CoherenceViolation::OracleReferencesUnknownEntity {
                    oracle_id: o.id.clone(),
                    entity: e.clone(),
                });
            }
        }
    }
    for e in &spec.prompt_requires {
        if !provided.contains(e.as_str()) {
            out.push(CoherenceViolation::PromptRequiresMissingData { entity: e.clone() });
        }
    }
    for (i, a) in spec.oracles.iter().enumerate() {
        for (j, b) in spec.oracles.iter().enumerate().skip(i + 1) {
            if a.id == b.id {
                out.push(CoherenceViolation::DuplicateOracleId { id: a.id.clone(), first: i, second: j });
            }
        }
    }
    let env_tools = catalog::environment_tool_names();
    for s in &spec.setup_steps {
        if let Some(t) = &s.tool {
            if !env_tools.contains(&t.as_str()) {
                out.push(CoherenceViolation::SetupToolUnavailable { step_id: s.id.clone(), tool: t.clone() });
            }
        }
    }
    out
}

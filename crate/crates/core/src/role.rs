//! Specialist roles and pipeline phases.

use std::fmt;

use serde::{Deserialize, Serialize};

/// The six specialists. Each binds to exactly one tool registry and one
/// prompt template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialistRole {
    TestArchitect,
    TestAnalyst,
    InfrastructureManager,
    Engineer,
    Investigator,
    Judge,
}

impl SpecialistRole {
    pub const ALL: [SpecialistRole; 6] = [
        SpecialistRole::TestArchitect,
        SpecialistRole::TestAnalyst,
        SpecialistRole::InfrastructureManager,
        SpecialistRole::Engineer,
        SpecialistRole::Investigator,
        SpecialistRole::Judge,
    ];

    /// Phase in which this specialist operates.
    pub fn phase(self) -> Phase {
        match self {
            SpecialistRole::TestArchitect | SpecialistRole::TestAnalyst => Phase::Generation,
            SpecialistRole::InfrastructureManager => Phase::Setup,
            SpecialistRole::Engineer => Phase::Execution,
            SpecialistRole::Investigator | SpecialistRole::Judge => Phase::Validation,
        }
    }

    /// Whether the role may append revisions to a test specification.
    pub fn may_revise(self) -> bool {
        matches!(
            self,
            SpecialistRole::TestArchitect
                | SpecialistRole::TestAnalyst
                | SpecialistRole::InfrastructureManager
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SpecialistRole::TestArchitect => "test_architect",
            SpecialistRole::TestAnalyst => "test_analyst",
            SpecialistRole::InfrastructureManager => "infrastructure_manager",
            SpecialistRole::Engineer => "engineer",
            SpecialistRole::Investigator => "investigator",
            SpecialistRole::Judge => "judge",
        }
    }
}

impl fmt::Display for SpecialistRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The four pipeline phases, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Generation,
    Setup,
    Execution,
    Validation,
}

impl Phase {
    pub const ALL: [Phase; 4] = [
        Phase::Generation,
        Phase::Setup,
        Phase::Execution,
        Phase::Validation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Generation => "generation",
            Phase::Setup => "setup",
            Phase::Execution => "execution",
            Phase::Validation => "validation",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

//! Token and wall-clock accounting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::LlmError;
use crate::role::{Phase, SpecialistRole};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl TokenUsage {
    pub fn new(input_tokens: u64, output_tokens: u64) -> Self {
        TokenUsage { input_tokens, output_tokens }
    }
}

impl std::ops::Add for TokenUsage {
    type Output = TokenUsage;
    fn add(self, o: TokenUsage) -> TokenUsage {
        TokenUsage { input_tokens: self.input_tokens + o.input_tokens, output_tokens: self.output_tokens + o.output_tokens }
    }
}

impl std::ops::AddAssign for TokenUsage {
    fn add_assign(&mut self, o: TokenUsage) {
        *self = *self + o;
    }
}

impl std::iter::Sum for TokenUsage {
    fn sum<I: Iterator<Item = TokenUsage>>(it: I) -> TokenUsage {
        it.fold(TokenUsage::default(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub role: SpecialistRole,
    pub phase: Phase,
    #[serde(flatten)]
    pub usage: TokenUsage,
    pub responses: u32,
}

/// Usage keyed by (role, phase) plus seconds spent per phase.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TokenLedger {
    entries: Vec<LedgerEntry>,
    wall_clock: BTreeMap<Phase, f64>,
}

impl TokenLedger {
    pub fn record(&mut self, role: SpecialistRole, phase: Phase, usage: TokenUsage) {
        match self.entries.iter_mut().find(|e| e.role == role && e.phase == phase) {
            Some(e) => {
                e.usage += usage;
                e.responses += 1;
            }
            None => self.entries.push(LedgerEntry { role, phase, usage, responses: 1 }),
        }
    }

    pub fn add_wall_clock(&mut self, phase: Phase, secs: f64) {
        *self.wall_clock.entry(phase).or_default() += secs;
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn wall_clock(&self, phase: Phase) -> f64 {
        self.wall_clock.get(&phase).copied().unwrap_or(0.0)
    }

    pub fn total_wall_clock(&self) -> f64 {
        self.wall_clock.values().sum()
    }

    pub fn by_role(&self) -> BTreeMap<SpecialistRole, TokenUsage> {
        let mut m = BTreeMap::new();
        for e in &self.entries {
            *m.entry(e.role).or_default() += e.usage;
        }
        m
    }

    pub fn by_phase(&self) -> BTreeMap<Phase, TokenUsage> {
        let mut m = BTreeMap::new();
        for e in &self.entries {
            *m.entry(e.phase).or_default() += e.usage;
        }
        m
    }

    pub fn total(&self) -> TokenUsage {
        self.entries.iter().map(|e| e.usage).sum()
    }

    pub fn responses(&self) -> u32 {
        self.entries.iter().map(|e| e.responses).sum()
    }

    pub fn merge(&mut self, other: &TokenLedger) {
        for e in &other.entries {
            self.record(e.role, e.phase, e.usage);
            if let Some(m) = self.entries.iter_mut().find(|x| x.role == e.role && x.phase == e.phase) {
                m.responses += e.responses - 1;
            }
        }
        for (p, s) in &other.wall_clock {
            self.add_wall_clock(*p, *s);
        }
    }
}

/// Prices per million tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricingTable {
    pub input_per_million: f64,
    pub output_per_million: f64,
}

impl PricingTable {
    pub fn validate(&self) -> Result<(), LlmError> {
        let ok = |p: f64| p.is_finite() && p >= 0.0;
        if ok(self.input_per_million) && ok(self.output_per_million) {
            Ok(())
        } else {
            Err(LlmError::InvalidPricing)
        }
    }

    pub fn cost(&self, u: TokenUsage) -> f64 {
        u.input_tokens as f64 / 1e6 * self.input_per_million + u.output_tokens as f64 / 1e6 * self.output_per_million
    }
}

/// Cost of everything in `ledger`, summed per (role, phase) entry.
pub fn cost_estimate(ledger: &TokenLedger, pricing: &PricingTable) -> Result<f64, LlmError> {
    pricing.validate()?;
    Ok(ledger.entries.iter().map(|e| pricing.cost(e.usage)).sum())
}

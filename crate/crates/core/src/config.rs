//! Suite configuration: a TOML file, overridable from `SPECOPS_*`
//! environment variables.
//!
//! ```toml
//! features = "features.json"
//! agent = "agents/mock_cli.json"
//! seed = 7
//! max_retries = 3
//! out = "out"
//! pricing = "pricing.json"
//! jobs = 4
//!
//! [provider]
//! kind = "scripted"
//! transcript = "transcripts/backup_bug.json"
//! ```
//!
//! Relative paths resolve against the directory holding the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::http::HttpProviderConfig;
use crate::llm::ledger::PricingTable;

pub const ENV_PREFIX: &str = "SPECOPS_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("output directory {path} is not writable: {reason}")]
    OutputNotWritable { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Scripted,
    Http,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderConfig {
    #[serde(default)]
    pub kind: ProviderKind,
    /// Recorded responses for [`ProviderKind::Scripted`]. Features may name
    /// their own instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Name of the environment variable holding the API key.
    #[serde(default = "default_key_var")]
    pub api_key_env: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_secs: Option<u64>,
}

fn default_key_var() -> String {
    format!("{ENV_PREFIX}API_KEY")
}

impl ProviderConfig {
    pub fn http(&self) -> Result<HttpProviderConfig, ConfigError> {
        let base_url = self.base_url.clone().ok_or_else(|| ConfigError::Invalid("http provider needs base_url".into()))?;
        let model = self.model.clone().ok_or_else(|| ConfigError::Invalid("http provider needs model".into()))?;
        Ok(HttpProviderConfig {
            base_url,
            model,
            api_key: std::env::var(&self.api_key_env).ok(),
            timeout_secs: self.timeout_secs.unwrap_or(120),
        })
    }
}

fn default_retries() -> u32 {
    3
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_jobs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteConfig {
    #[serde(default)]
    pub provider: ProviderConfig,
    pub features: PathBuf,
    /// Agent specification file used by features that do not name one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pricing: Option<PathBuf>,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

impl SuiteConfig {
    /// A config with defaults everywhere except the features file.
    pub fn new(features: impl Into<PathBuf>) -> Self {
        SuiteConfig {
            provider: ProviderConfig { api_key_env: default_key_var(), ..Default::default() },
            features: features.into(),
            agent: None,
            seed: 0,
            max_retries: default_retries(),
            out: default_out(),
            pricing: None,
            jobs: default_jobs(),
        }
    }

    pub fn parse(text: &str, base: &Path, origin: &Path) -> Result<Self, ConfigError> {
        let mut c: SuiteConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: origin.to_path_buf(), reason: e.to_string() })?;
        c.rebase(base);
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.to_path_buf(), reason: e.to_string() })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")), path)
    }

    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.features);
        join(&mut self.out);
        for p in [&mut self.agent, &mut self.pricing, &mut self.provider.transcript].into_iter().flatten() {
            join(p);
        }
    }

    /// Applies `SPECOPS_*` overrides from `vars`.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (k, v) in vars {
            let Some(key) = k.as_ref().strip_prefix(ENV_PREFIX) else { continue };
            let v = v.as_ref();
            let num = |what: &str| ConfigError::Invalid(format!("{ENV_PREFIX}{what}={v} is not a number"));
            match key {
                "FEATURES" => self.features = v.into(),
                "AGENT" => self.agent = Some(v.into()),
                "SEED" => self.seed = v.parse().map_err(|_| num(key))?,
                "MAX_RETRIES" => self.max_retries = v.parse().map_err(|_| num(key))?,
                "OUT" => self.out = v.into(),
                "PRICING" => self.pricing = Some(v.into()),
                "JOBS" => self.jobs = v.parse().map_err(|_| num(key))?,
                "TRANSCRIPT" => self.provider.transcript = Some(v.into()),
                "PROVIDER" => {
                    self.provider.kind = match v {
                        "scripted" => ProviderKind::Scripted,
                        "http" => ProviderKind::Http,
                        _ => return Err(ConfigError::Invalid(format!("{ENV_PREFIX}PROVIDER={v}: use scripted or http"))),
                    }
                }
                "BASE_URL" => self.provider.base_url = Some(v.into()),
                "MODEL" => self.provider.model = Some(v.into()),
                _ => {}
            }
        }
        Ok(())
    }

    /// Checks fields that do not depend on the features file. Whether a
    /// scripted run has a transcript is checked per feature by the suite.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_retries == 0 {
            return Err(ConfigError::Invalid("max_retries must be at least 1".into()));
        }
        if self.jobs == 0 {
            return Err(ConfigError::Invalid("jobs must be at least 1".into()));
        }
        if self.provider.kind == ProviderKind::Http {
            self.provider.http()?;
        }
        Ok(())
    }

    /// Creates the output directory and proves a file can be written there.
    pub fn ensure_out_writable(&self) -> Result<(), ConfigError> {
        let err = |e: std::io::Error| ConfigError::OutputNotWritable { path: self.out.clone(), reason: e.to_string() };
        std::fs::create_dir_all(&self.out).map_err(err)?;
        tempfile::NamedTempFile::new_in(&self.out).map(drop).map_err(err)
    }

    pub fn load_pricing(&self) -> Result<Option<PricingTable>, ConfigError> {
        let Some(p) = &self.pricing else { return Ok(None) };
        let text =
            std::fs::read_to_string(p).map_err(|e| ConfigError::Read { path: p.clone(), reason: e.to_string() })?;
        let t: PricingTable =
            serde_json::from_str(&text).map_err(|e| ConfigError::Parse { path: p.clone(), reason: e.to_string() })?;
        t.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(Some(t))
    }
}

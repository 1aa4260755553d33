use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backtest::BacktestConfig;
use crate::clustering::EmbedOptions;
use crate::error::{Error, Result};
use crate::market_data::CohortSpec;
use crate::transduction::TransductionConfig;

fn default_trials() -> usize {
    30
}
fn default_threshold() -> f64 {
    0.5
}
fn default_cutoff() -> f64 {
    0.1
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_model() -> String {
    "mock".into()
}
fn default_retries() -> u32 {
    2
}
fn default_cap() -> usize {
    4
}
fn default_accuracy() -> f64 {
    0.7
}
fn default_jitter() -> f64 {
    0.1
}
fn default_batch() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub markets: PathBuf,
    pub prices: PathBuf,
    /// Directory with `cluster_labeling.txt` and
    /// `relationship_discovery.txt`; the built-in templates otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompts: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatewayKind {
    /// Scripted responses from `mock_script`.
    Mock,
    /// Planted-accuracy simulator over the cohort's realized outcomes.
    Simulated,
    /// JSON-over-HTTP chat endpoint.
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewaySettings {
    pub kind: GatewayKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credential_env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock_script: Option<PathBuf>,
    /// For `http`: answer from this script when the endpoint is down.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_mock_script: Option<PathBuf>,
    #[serde(default = "default_accuracy")]
    pub simulated_accuracy: f64,
    #[serde(default = "default_model")]
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    /// Per-trial temperature is `temperature + U(0, temperature_jitter)`
    /// drawn from the trial seed.
    #[serde(default = "default_jitter")]
    pub temperature_jitter: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_cap")]
    pub concurrency_cap: usize,
}

impl Default for GatewaySettings {
    fn default() -> Self {
        GatewaySettings {
            kind: GatewayKind::Mock,
            endpoint: None,
            credential_env: None,
            mock_script: None,
            fallback_mock_script: None,
            simulated_accuracy: default_accuracy(),
            model_name: default_model(),
            temperature: 0.0,
            temperature_jitter: default_jitter(),
            max_retries: default_retries(),
            concurrency_cap: default_cap(),
        }
    }
}

impl GatewaySettings {
    pub fn transduction(&self, temperature: f64) -> TransductionConfig {
        TransductionConfig {
            model_name: self.model_name.clone(),
            temperature,
            max_retries: self.max_retries,
            concurrency_cap: self.concurrency_cap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Hashed,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSettings {
    pub kind: EmbeddingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credential_env: Option<String>,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_cap")]
    pub max_in_flight: usize,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        EmbeddingSettings {
            kind: EmbeddingKind::Hashed,
            endpoint: None,
            model: None,
            credential_env: None,
            batch_size: default_batch(),
            max_in_flight: default_cap(),
        }
    }
}

impl EmbeddingSettings {
    pub fn options(&self) -> EmbedOptions {
        EmbedOptions { batch_size: self.batch_size, max_in_flight: self.max_in_flight }
    }
}

/// Everything a run needs, loaded from one TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub cohorts: Vec<CohortSpec>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_threshold")]
    pub confidence_threshold: f64,
    #[serde(default = "default_cutoff")]
    pub entry_cutoff: f64,
    #[serde(default = "default_cutoff")]
    pub final_price_cutoff: f64,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    /// Run trials on separate threads.
    #[serde(default)]
    pub parallel_trials: bool,
    /// Store per-stage wall-clock times in `run_manifest.json`. Off by
    /// default so repeated runs produce identical files.
    #[serde(default)]
    pub record_timings: bool,
    pub inputs: InputPaths,
    #[serde(default)]
    pub gateway: GatewaySettings,
    #[serde(default)]
    pub embedding: EmbeddingSettings,
}

impl RunConfig {
    pub fn new(inputs: InputPaths, cohorts: Vec<CohortSpec>) -> Self {
        RunConfig {
            cohorts,
            trials: default_trials(),
            base_seed: 0,
            confidence_threshold: default_threshold(),
            entry_cutoff: default_cutoff(),
            final_price_cutoff: default_cutoff(),
            output_dir: default_out(),
            parallel_trials: false,
            record_timings: false,
            inputs,
            gateway: GatewaySettings::default(),
            embedding: EmbeddingSettings::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file. Relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_relative_to(base);
        }
        Ok(cfg)
    }

    pub fn resolve_relative_to(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.inputs.markets);
        fix(&mut self.inputs.prices);
        fix(&mut self.output_dir);
        for p in [
            self.inputs.prompts.as_mut(),
            self.gateway.mock_script.as_mut(),
            self.gateway.fallback_mock_script.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn backtest(&self) -> BacktestConfig {
        BacktestConfig { entry_cutoff: self.entry_cutoff, final_price_cutoff: self.final_price_cutoff }
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.base_seed.wrapping_add(trial as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.cohorts.is_empty() {
            return Err(Error::Config("at least one cohort is required".into()));
        }
        for (name, v) in [
            ("confidence_threshold", self.confidence_threshold),
            ("entry_cutoff", self.entry_cutoff),
            ("final_price_cutoff", self.final_price_cutoff),
        ] {
            if !(v > 0.0 && v <= 0.5) {
                return Err(Error::Config(format!("{name} = {v} is outside (0, 0.5]")));
            }
        }
        let g = &self.gateway;
        if g.kind == GatewayKind::Http && g.endpoint.is_none() {
            return Err(Error::Config("gateway.kind = \"http\" needs gateway.endpoint".into()));
        }
        if !(0.0..=1.0).contains(&g.simulated_accuracy) {
            return Err(Error::Config("gateway.simulated_accuracy must be in [0, 1]".into()));
        }
        if !(g.temperature >= 0.0 && g.temperature_jitter >= 0.0) {
            return Err(Error::Config("gateway temperatures must be non-negative".into()));
        }
        if g.concurrency_cap == 0 {
            return Err(Error::Config("gateway.concurrency_cap must be positive".into()));
        }
        if self.embedding.kind == EmbeddingKind::Http && self.embedding.endpoint.is_none() {
            return Err(Error::Config("embedding.kind = \"http\" needs embedding.endpoint".into()));
        }
        Ok(())
    }
}

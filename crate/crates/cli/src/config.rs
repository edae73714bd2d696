//! Run configuration: a TOML file whose top-level keys can each be
//! overridden by the command-line flag of the same name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use cocoa_core::estimators::DEFAULT_SAR_TEMPERATURE;
use cocoa_core::evaluation::DEFAULT_MAX_REJECTION;
use cocoa_core::similarity::provider::ENDPOINT_ENV;
use cocoa_core::similarity::ProviderConfig;
use cocoa_core::{EstimatorId, SimilarityBackend, TargetStrategy};
use serde::Deserialize;

use crate::error::RunError;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Dataset name → records JSONL.
    pub datasets: BTreeMap<String, PathBuf>,
    pub estimators: Vec<String>,
    pub strategy: String,
    pub backend: String,
    pub endpoint: Option<String>,
    pub temperature: f64,
    pub max_rejection: f64,
    /// Task group → dataset names. Empty means one group, `all`.
    pub groups: BTreeMap<String, Vec<String>>,
    pub out_dir: PathBuf,
    /// Provider score cache; loaded before and saved after each run.
    pub cache: Option<PathBuf>,
    /// Scoring threads; 0 means one per logical core.
    pub workers: usize,
    pub provider: ProviderSection,
    pub ablate: AblateSection,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            datasets: BTreeMap::new(),
            estimators: vec!["msp".into(), "ppl".into(), "cocoa_msp".into(), "cocoa_ppl".into()],
            strategy: "greedy".into(),
            backend: "jaccard".into(),
            endpoint: None,
            temperature: DEFAULT_SAR_TEMPERATURE,
            max_rejection: DEFAULT_MAX_REJECTION,
            groups: BTreeMap::new(),
            out_dir: PathBuf::from("out"),
            cache: None,
            workers: 0,
            provider: ProviderSection::default(),
            ablate: AblateSection::default(),
            synth: SynthConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProviderSection {
    pub batch_size: usize,
    pub max_attempts: usize,
    pub backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for ProviderSection {
    fn default() -> Self {
        let d = ProviderConfig::default();
        Self {
            batch_size: d.batch_size,
            max_attempts: d.max_attempts,
            backoff_ms: d.backoff.as_millis() as u64,
            max_in_flight: d.max_in_flight,
        }
    }
}

impl ProviderSection {
    pub fn to_provider_config(&self) -> ProviderConfig {
        ProviderConfig {
            batch_size: self.batch_size,
            max_attempts: self.max_attempts,
            backoff: Duration::from_millis(self.backoff_ms),
            max_in_flight: self.max_in_flight,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblateSection {
    pub backends: Vec<String>,
    pub strategies: Vec<String>,
}

impl Default for AblateSection {
    fn default() -> Self {
        Self {
            backends: vec!["jaccard".into(), "rouge_l".into()],
            strategies: vec!["greedy".into(), "best".into()],
        }
    }
}

/// A config with every name resolved and every range checked.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub datasets: BTreeMap<String, PathBuf>,
    pub estimators: Vec<EstimatorId>,
    pub strategy: TargetStrategy,
    pub backend: SimilarityBackend,
    pub endpoint: Option<String>,
    pub temperature: f64,
    pub max_rejection: f64,
    pub groups: BTreeMap<String, Vec<String>>,
    pub out_dir: PathBuf,
    pub cache: Option<PathBuf>,
    pub workers: usize,
    pub provider: ProviderConfig,
    pub ablate_backends: Vec<SimilarityBackend>,
    pub ablate_strategies: Vec<TargetStrategy>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
    }

    pub fn resolve(&self) -> Result<Resolved, RunError> {
        let config_err = |e: cocoa_core::Error| RunError::Config(e.to_string());
        let estimators = self
            .estimators
            .iter()
            .map(|e| {
                if e == "all" {
                    Ok(EstimatorId::all())
                } else {
                    e.parse::<EstimatorId>().map(|id| vec![id])
                }
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(config_err)?
            .into_iter()
            .flatten()
            .collect::<Vec<_>>();
        if estimators.is_empty() {
            return Err(RunError::Config("no estimators configured".into()));
        }
        if !(self.max_rejection > 0.0 && self.max_rejection <= 1.0) {
            return Err(RunError::Config(format!(
                "max_rejection must lie in (0, 1], got {}",
                self.max_rejection
            )));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(RunError::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        let groups = if self.groups.is_empty() {
            BTreeMap::from([("all".to_string(), self.datasets.keys().cloned().collect())])
        } else {
            self.groups.clone()
        };
        let endpoint = self
            .endpoint
            .clone()
            .or_else(|| std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.is_empty()));
        Ok(Resolved {
            datasets: self.datasets.clone(),
            estimators,
            strategy: self.strategy.parse().map_err(config_err)?,
            backend: self.backend.parse().map_err(config_err)?,
            endpoint,
            temperature: self.temperature,
            max_rejection: self.max_rejection,
            groups,
            out_dir: self.out_dir.clone(),
            cache: self.cache.clone(),
            workers: self.workers,
            provider: self.provider.to_provider_config(),
            ablate_backends: self
                .ablate
                .backends
                .iter()
                .map(|b| b.parse())
                .collect::<Result<_, _>>()
                .map_err(config_err)?,
            ablate_strategies: self
                .ablate
                .strategies
                .iter()
                .map(|s| s.parse())
                .collect::<Result<_, _>>()
                .map_err(config_err)?,
        })
    }
}

//! Seeded synthetic generation records with a planted signal.
//!
//! Each record draws a latent difficulty `z ~ N(0, 1)`. Difficulty controls
//! how often the samples repeat the canonical answer (the greedy output):
//!
//! ```text
//! agreement = 1 − (1 − overlap) · Φ(z)
//! quality   = Φ(−rho · z + sqrt(1 − rho²) · ε)
//! ```
//!
//! so `rho` sets how strongly answer consistency predicts quality, and
//! `overlap = 1` makes every sample identical to the greedy answer. Token
//! log-probabilities come from a confident or a diffuse regime; the diffuse
//! regime is picked with probability `info_signal · (1 − quality) +
//! (1 − info_signal) / 2`, which gives the probability-based scores a weaker
//! signal of their own. Φ is the logistic approximation of the normal CDF.

use std::collections::BTreeMap;

use cocoa_core::record::{select_target, GenerationRecord, Sequence, TokenObservation};
use cocoa_core::TargetStrategy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::Deserialize;

use crate::error::RunError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_records: usize,
    /// Samples per record (M).
    pub samples: usize,
    pub vocab_size: usize,
    /// Share of samples forced to agree with the canonical answer.
    pub overlap: f64,
    /// Correlation knob between answer consistency and quality.
    pub rho: f64,
    pub info_signal: f64,
    /// Mean per-token negative log-probability in the confident regime.
    pub confident_scale: f64,
    pub diffuse_scale: f64,
    /// Quality multiplier applied when a strategy selects a non-canonical
    /// answer.
    pub off_answer_penalty: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            n_records: 200,
            samples: 10,
            vocab_size: 1000,
            overlap: 0.0,
            rho: 0.5,
            info_signal: 0.3,
            confident_scale: 0.05,
            diffuse_scale: 0.8,
            off_answer_penalty: 0.3,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<(), RunError> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(RunError::Config(format!("synth.{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("overlap", self.overlap)?;
        unit("rho", self.rho)?;
        unit("info_signal", self.info_signal)?;
        unit("off_answer_penalty", self.off_answer_penalty)?;
        if self.samples == 0 {
            return Err(RunError::Config("synth.samples must be at least 1".into()));
        }
        if self.vocab_size < 2 {
            return Err(RunError::Config("synth.vocab_size must be at least 2".into()));
        }
        if !(self.confident_scale > 0.0 && self.diffuse_scale > 0.0) {
            return Err(RunError::Config("synth regime scales must be positive".into()));
        }
        Ok(())
    }
}

fn phi(x: f64) -> f64 {
    1.0 / (1.0 + (-1.702 * x).exp())
}

struct Generator {
    rng: ChaCha8Rng,
    cfg: SynthConfig,
}

impl Generator {
    fn words(&mut self) -> Vec<String> {
        let len = self.rng.random_range(3..=6);
        (0..len)
            .map(|_| format!("w{}", self.rng.random_range(0..self.cfg.vocab_size)))
            .collect()
    }

    fn sequence(&mut self, words: &[String], scale: f64) -> Sequence {
        let tokens = words
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let e: f64 = Exp1.sample(&mut self.rng);
                let log_prob = -scale * e;
                let jitter: f64 = self.rng.random_range(0.0..0.1);
                let text = if i == 0 { w.clone() } else { format!(" {w}") };
                TokenObservation::new(text, log_prob, Some(1.5 * -log_prob + jitter))
            })
            .collect();
        Sequence::from_tokens(tokens)
    }

    fn record(&mut self, index: usize) -> GenerationRecord {
        let cfg = self.cfg.clone();
        let z: f64 = StandardNormal.sample(&mut self.rng);
        let eps: f64 = StandardNormal.sample(&mut self.rng);
        let agreement = 1.0 - (1.0 - cfg.overlap) * phi(z);
        let quality = phi(-cfg.rho * z + (1.0 - cfg.rho * cfg.rho).sqrt() * eps);
        let p_diffuse = cfg.info_signal * (1.0 - quality) + (1.0 - cfg.info_signal) * 0.5;
        let scale = if self.rng.random_bool(p_diffuse.clamp(0.0, 1.0)) {
            cfg.diffuse_scale
        } else {
            cfg.confident_scale
        };

        let canonical = self.words();
        let greedy = self.sequence(&canonical, scale);
        let mut samples = Vec::with_capacity(cfg.samples);
        for _ in 0..cfg.samples {
            if self.rng.random_bool(agreement.clamp(0.0, 1.0)) {
                samples.push(self.sequence(&canonical, scale));
            } else {
                let alt = self.words();
                samples.push(self.sequence(&alt, cfg.diffuse_scale));
            }
        }
        let prompt_words = self.words().join(" ");

        let mut record = GenerationRecord {
            record_id: format!("synth-{}-{index:05}", cfg.seed),
            input_text: format!("question {index}: {prompt_words}?"),
            greedy: Some(greedy),
            samples,
            quality: BTreeMap::new(),
            precomputed_sim: None,
        };
        let canonical_text = canonical.join(" ");
        let mut quality_map = BTreeMap::new();
        for strategy in TargetStrategy::ALL {
            let (target, _) = select_target(&record, strategy).expect("greedy is always present");
            let q = if target.text == canonical_text {
                quality
            } else {
                quality * cfg.off_answer_penalty
            };
            quality_map.insert(strategy.as_str().to_string(), q);
        }
        record.quality = quality_map;
        record
    }
}

/// Generates `cfg.n_records` records; identical configs give identical output.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<GenerationRecord>, RunError> {
    cfg.validate()?;
    let mut gen = Generator { rng: ChaCha8Rng::seed_from_u64(cfg.seed), cfg: cfg.clone() };
    Ok((0..cfg.n_records).map(|i| gen.record(i)).collect())
}

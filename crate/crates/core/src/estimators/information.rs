//! Estimators that read only the model's own token probabilities.

use crate::error::{Error, Result};
use crate::record::{seq_log_prob, Sequence};
use crate::similarity::PairSimilarity;

use super::{Estimate, Flag};

/// Maximum sequence probability: −log P(y | x).
pub fn msp(target: &Sequence) -> f64 {
    -seq_log_prob(target)
}

/// Perplexity in log form: −log P(y | x) / L.
pub fn ppl(target: &Sequence) -> f64 {
    msp(target) / target.len() as f64
}

/// Mean token entropy: the average per-step distribution entropy.
pub fn mte(target: &Sequence) -> Result<f64> {
    let mut total = 0.0;
    for (i, tok) in target.tokens.iter().enumerate() {
        total += tok.dist_entropy.ok_or_else(|| Error::MissingEntropy {
            estimator: "mte".into(),
            token_index: i,
        })?;
    }
    Ok(total / target.len() as f64)
}

/// Monte Carlo sequence entropy: −(1/M) Σ log P(y⁽ⁱ⁾ | x).
pub fn mcse(samples: &[Sequence]) -> f64 {
    -samples.iter().map(seq_log_prob).sum::<f64>() / samples.len() as f64
}

/// Length-normalized Monte Carlo sequence entropy.
pub fn mcnse(samples: &[Sequence]) -> f64 {
    -samples.iter().map(|s| seq_log_prob(s) / s.len() as f64).sum::<f64>() / samples.len() as f64
}

/// Texts compared to measure the relevance of each token: the prompt joined
/// with the full output, and the same with token `k` removed.
pub fn relevance_texts(target: &Sequence, input_text: &str) -> (String, Vec<String>) {
    let join = |skip: Option<usize>| {
        let mut s = String::with_capacity(input_text.len() + target.text.len() + 1);
        s.push_str(input_text);
        s.push(' ');
        for (i, t) in target.tokens.iter().enumerate() {
            if Some(i) != skip {
                s.push_str(&t.text);
            }
        }
        s
    };
    let full = join(None);
    let ablated = (0..target.len()).map(|k| join(Some(k))).collect();
    (full, ablated)
}

/// Token relevances R_T(y_k) = 1 − g(x ∪ y, x ∪ y \ y_k).
pub fn token_relevance(target: &Sequence, input_text: &str, sim: &dyn PairSimilarity) -> Result<Vec<f64>> {
    let (full, ablated) = relevance_texts(target, input_text);
    let pairs: Vec<(&str, &str)> = ablated.iter().map(|a| (full.as_str(), a.as_str())).collect();
    Ok(sim.score(&pairs)?.into_iter().map(|g| 1.0 - g).collect())
}

/// −Σ R̃_l · log P(y_l) with R̃ the relevances normalized to sum to 1. An
/// all-zero relevance vector falls back to uniform weights and is flagged.
pub fn token_sar_weighted(target: &Sequence, relevance: &[f64]) -> Estimate {
    debug_assert_eq!(relevance.len(), target.len());
    let total: f64 = relevance.iter().sum();
    if total <= 0.0 {
        return Estimate::flagged(ppl(target), Flag::UniformRelevanceFallback);
    }
    let value = -target
        .tokens
        .iter()
        .zip(relevance)
        .map(|(t, r)| (r / total) * t.log_prob)
        .sum::<f64>();
    Estimate::new(value)
}

pub fn token_sar(target: &Sequence, input_text: &str, sim: &dyn PairSimilarity) -> Result<Estimate> {
    let relevance = token_relevance(target, input_text, sim)?;
    Ok(token_sar_weighted(target, &relevance))
}

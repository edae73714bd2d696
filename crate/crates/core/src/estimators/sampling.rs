//! Estimators that combine the probabilities of several sampled outputs:
//! semantic entropy, SentenceSAR and SAR.

use crate::error::{Error, Result};
use crate::similarity::{NliMatrices, SimilarityMatrix};

use super::Estimate;

/// Partition of the samples into meaning clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticClustering {
    /// Cluster id of each sample; ids are dense and numbered in order of
    /// first appearance.
    pub assignments: Vec<usize>,
    pub num_clusters: usize,
}

impl SemanticClustering {
    pub fn singletons(m: usize) -> Self {
        Self { assignments: (0..m).collect(), num_clusters: m }
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters];
        for (i, &c) in self.assignments.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

/// Single greedy pass in sample order. A sample joins the first cluster whose
/// first member entails it in both directions (p_entail > p_contra each way),
/// otherwise it starts a new cluster.
pub fn cluster_semantic(nli: &NliMatrices) -> SemanticClustering {
    let m = nli.entail.len();
    let mut representatives: Vec<usize> = Vec::new();
    let mut assignments = Vec::with_capacity(m);
    for i in 0..m {
        let agrees = |r: usize| {
            nli.entail[i][r] > nli.contra[i][r] && nli.entail[r][i] > nli.contra[r][i]
        };
        match representatives.iter().position(|&r| agrees(r)) {
            Some(c) => assignments.push(c),
            None => {
                assignments.push(representatives.len());
                representatives.push(i);
            }
        }
    }
    SemanticClustering { assignments, num_clusters: representatives.len() }
}

pub(crate) fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// −Σ_k (|C_k|/M) log P̂_k with P̂_k the summed probability of cluster k.
/// `log_probs[i]` is log P(y⁽ⁱ⁾ | x).
pub fn semantic_entropy(log_probs: &[f64], clustering: &SemanticClustering) -> f64 {
    let m = log_probs.len() as f64;
    clustering
        .members()
        .iter()
        .map(|members| {
            let log_p = log_sum_exp(members.iter().map(|&i| log_probs[i]));
            -(members.len() as f64 / m) * log_p
        })
        .sum()
}

/// −(1/M) Σ_i log(P_i + (1/t) Σ_{k≠i} g_ik P_k), evaluated in log space.
pub fn sentence_sar(log_probs: &[f64], sim: &SimilarityMatrix, temperature: f64) -> Result<Estimate> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "SentenceSAR temperature must be positive, got {temperature}"
        )));
    }
    let m = log_probs.len();
    if sim.n() != m {
        return Err(Error::InvalidArgument(format!(
            "similarity matrix is {0}x{0} but there are {m} samples",
            sim.n()
        )));
    }
    let log_inv_t = -temperature.ln();
    let total: f64 = (0..m)
        .map(|i| {
            let shifted = (0..m)
                .filter(|&k| k != i && sim.get(i, k) > 0.0)
                .map(|k| sim.get(i, k).ln() + log_inv_t + log_probs[k]);
            log_sum_exp(std::iter::once(log_probs[i]).chain(shifted))
        })
        .sum();
    Ok(Estimate::new(-total / m as f64))
}

/// SentenceSAR over token-shifted probabilities P' = exp(−TokenSAR).
pub fn sar(token_sar_values: &[f64], sim: &SimilarityMatrix, temperature: f64) -> Result<Estimate> {
    let shifted: Vec<f64> = token_sar_values.iter().map(|v| -v).collect();
    sentence_sar(&shifted, sim, temperature)
}

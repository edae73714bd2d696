//! Pairwise similarity g(a, b) ∈ [0, 1] between generated texts and the
//! symmetrized similarity matrices built from it.

pub mod cache;
pub mod lexical;
pub mod provider;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::record::{GenerationRecord, TargetRef};

pub use cache::SimilarityCache;
pub use lexical::{jaccard, rouge_l};
pub use provider::{ProviderClient, ProviderConfig, ProviderStats, Transport, TransportError};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SimilarityBackend {
    Jaccard,
    RougeL,
    /// g = p_entail(a, b)
    NliEntail,
    /// g = 1 − p_contra(a, b)
    NliContra,
    CrossEncoder,
    AlignScore,
    /// A named block stored in the record's `precomputed_sim`.
    Precomputed(String),
}

impl SimilarityBackend {
    pub fn name(&self) -> String {
        match self {
            SimilarityBackend::Precomputed(n) => format!("precomputed:{n}"),
            other => other.wire_name().to_string(),
        }
    }

    /// Name used on the provider wire and as the `precomputed_sim` key.
    pub fn wire_name(&self) -> &str {
        match self {
            SimilarityBackend::Jaccard => "jaccard",
            SimilarityBackend::RougeL => "rouge_l",
            SimilarityBackend::NliEntail => "nli_entail",
            SimilarityBackend::NliContra => "nli_contra",
            SimilarityBackend::CrossEncoder => "cross_encoder",
            SimilarityBackend::AlignScore => "align_score",
            SimilarityBackend::Precomputed(n) => n,
        }
    }

    pub fn is_lexical(&self) -> bool {
        matches!(self, SimilarityBackend::Jaccard | SimilarityBackend::RougeL)
    }

    pub fn needs_provider(&self) -> bool {
        matches!(
            self,
            SimilarityBackend::NliEntail
                | SimilarityBackend::NliContra
                | SimilarityBackend::CrossEncoder
                | SimilarityBackend::AlignScore
        )
    }
}

impl fmt::Display for SimilarityBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for SimilarityBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "jaccard" => SimilarityBackend::Jaccard,
            "rouge_l" => SimilarityBackend::RougeL,
            "nli_entail" => SimilarityBackend::NliEntail,
            "nli_contra" => SimilarityBackend::NliContra,
            "cross_encoder" => SimilarityBackend::CrossEncoder,
            "align_score" => SimilarityBackend::AlignScore,
            other => match other.strip_prefix("precomputed:") {
                Some(name) if !name.is_empty() => SimilarityBackend::Precomputed(name.to_string()),
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown similarity backend `{other}`"
                    )))
                }
            },
        })
    }
}

/// Directional raw similarity over text pairs.
pub trait PairSimilarity: Sync {
    fn score(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>>;
}

/// Live scorer for a backend: lexical backends run in-process, neural ones go
/// through a provider client.
#[derive(Clone, Copy)]
pub struct Scorer<'a> {
    backend: &'a SimilarityBackend,
    provider: Option<&'a ProviderClient>,
}

impl<'a> Scorer<'a> {
    pub fn new(backend: &'a SimilarityBackend, provider: Option<&'a ProviderClient>) -> Self {
        Self { backend, provider }
    }
}

impl PairSimilarity for Scorer<'_> {
    fn score(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>> {
        match self.backend {
            SimilarityBackend::Jaccard => Ok(pairs.iter().map(|(a, b)| jaccard(a, b)).collect()),
            SimilarityBackend::RougeL => Ok(pairs.iter().map(|(a, b)| rouge_l(a, b)).collect()),
            SimilarityBackend::Precomputed(name) => Err(Error::UnmetRequirement {
                estimator: format!("backend precomputed:{name}"),
                requirement: "texts outside the precomputed block cannot be scored".into(),
            }),
            backend => match self.provider {
                Some(p) => p.score(backend.wire_name(), pairs),
                None => Err(Error::UnmetRequirement {
                    estimator: format!("backend {}", backend.name()),
                    requirement: "a provider endpoint".into(),
                }),
            },
        }
    }
}

/// Symmetrized similarity matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    entries: Vec<Vec<f64>>,
    backend: SimilarityBackend,
}

impl SimilarityMatrix {
    /// Symmetrizes a raw directional matrix by pairwise averaging and forces
    /// the diagonal to 1.
    pub fn from_raw(raw: &[Vec<f64>], backend: SimilarityBackend) -> Result<Self> {
        let n = raw.len();
        if n == 0 || raw.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument(format!(
                "similarity matrix must be square and non-empty (got {n} rows)"
            )));
        }
        if let Some(v) = raw.iter().flatten().find(|v| !v.is_finite() || !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("similarity {v} outside [0, 1]")));
        }
        let mut entries = vec![vec![1.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let g = (raw[i][j] + raw[j][i]) / 2.0;
                entries[i][j] = g;
                entries[j][i] = g;
            }
        }
        Ok(Self { entries, backend })
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn backend(&self) -> &SimilarityBackend {
        &self.backend
    }

    pub fn is_symmetrized(&self) -> bool {
        true
    }

    /// Principal submatrix on `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let entries = indices
            .iter()
            .map(|&i| indices.iter().map(|&j| self.entries[i][j]).collect())
            .collect();
        Self { entries, backend: self.backend.clone() }
    }
}

/// Raw g for every ordered pair of `texts`; diagonal set to 1 without scoring.
pub fn raw_matrix(texts: &[&str], sim: &dyn PairSimilarity) -> Result<Vec<Vec<f64>>> {
    let n = texts.len();
    let mut pairs = Vec::with_capacity(n * n.saturating_sub(1));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                pairs.push((texts[i], texts[j]));
            }
        }
    }
    let scores = sim.score(&pairs)?;
    let mut it = scores.into_iter();
    let mut raw = vec![vec![1.0; n]; n];
    for (i, row) in raw.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            if i != j {
                *cell = it.next().expect("one score per pair");
            }
        }
    }
    Ok(raw)
}

pub fn build_matrix(
    texts: &[&str],
    backend: SimilarityBackend,
    sim: &dyn PairSimilarity,
) -> Result<SimilarityMatrix> {
    if texts.is_empty() {
        return Err(Error::InvalidArgument("cannot build a matrix over zero sequences".into()));
    }
    SimilarityMatrix::from_raw(&raw_matrix(texts, sim)?, backend)
}

/// Symmetrized g between the target and each sample. `target_index` marks the
/// target as one of the samples; that entry is exactly 1 and never scored.
pub fn target_row(
    target: &str,
    target_index: Option<usize>,
    samples: &[&str],
    sim: &dyn PairSimilarity,
) -> Result<Vec<f64>> {
    let others: Vec<usize> = (0..samples.len()).filter(|&i| Some(i) != target_index).collect();
    let mut pairs = Vec::with_capacity(2 * others.len());
    for &i in &others {
        pairs.push((target, samples[i]));
        pairs.push((samples[i], target));
    }
    let scores = sim.score(&pairs)?;
    let mut row = vec![1.0; samples.len()];
    for (k, &i) in others.iter().enumerate() {
        row[i] = (scores[2 * k] + scores[2 * k + 1]) / 2.0;
    }
    Ok(row)
}

/// Directional entailment and contradiction probabilities among samples.
#[derive(Debug, Clone, PartialEq)]
pub struct NliMatrices {
    pub entail: Vec<Vec<f64>>,
    pub contra: Vec<Vec<f64>>,
}

/// Similarity for one run: a backend plus, for neural backends, a provider.
/// Precomputed blocks stored in a record take precedence over live scoring.
#[derive(Clone, Copy)]
pub struct SimilarityContext<'a> {
    pub backend: &'a SimilarityBackend,
    pub provider: Option<&'a ProviderClient>,
}

impl<'a> SimilarityContext<'a> {
    pub fn new(backend: &'a SimilarityBackend, provider: Option<&'a ProviderClient>) -> Self {
        Self { backend, provider }
    }

    pub fn scorer(&self) -> Scorer<'a> {
        Scorer::new(self.backend, self.provider)
    }

    /// Raw matrix over `[greedy?] + samples` for this context's backend.
    pub fn record_block(&self, record: &GenerationRecord) -> Result<Vec<Vec<f64>>> {
        block_for(record, self.backend, self.provider)
    }

    /// Directional NLI probabilities among the samples, from precomputed
    /// `nli_entail`/`nli_contra` blocks or from the provider.
    pub fn nli(&self, record: &GenerationRecord) -> Result<NliMatrices> {
        let entail_block = block_for(record, &SimilarityBackend::NliEntail, self.provider)?;
        let contra_block = block_for(record, &SimilarityBackend::NliContra, self.provider)?;
        let off = record.block_offset();
        let m = record.num_samples();
        let sub = |b: &Vec<Vec<f64>>, f: &dyn Fn(f64) -> f64| -> Vec<Vec<f64>> {
            (0..m).map(|i| (0..m).map(|j| f(b[off + i][off + j])).collect()).collect()
        };
        Ok(NliMatrices {
            entail: sub(&entail_block, &|g| g),
            contra: sub(&contra_block, &|g| 1.0 - g),
        })
    }
}

fn block_for(
    record: &GenerationRecord,
    backend: &SimilarityBackend,
    provider: Option<&ProviderClient>,
) -> Result<Vec<Vec<f64>>> {
    if let Some(block) = record.precomputed(backend.wire_name()) {
        return Ok(block.clone());
    }
    if let SimilarityBackend::Precomputed(name) = backend {
        return Err(Error::UnmetRequirement {
            estimator: format!("record `{}`", record.record_id),
            requirement: format!("a precomputed similarity block named `{name}`"),
        });
    }
    let texts: Vec<&str> = record
        .greedy
        .iter()
        .chain(record.samples.iter())
        .map(|s| s.text.as_str())
        .collect();
    raw_matrix(&texts, &Scorer::new(backend, provider))
}

/// Position of a target inside a `[greedy?] + samples` block.
pub fn block_index(record: &GenerationRecord, target: TargetRef) -> usize {
    match target {
        TargetRef::Greedy => 0,
        TargetRef::Sample(i) => record.block_offset() + i,
    }
}

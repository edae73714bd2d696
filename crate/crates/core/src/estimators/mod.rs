//! Uncertainty estimators. Larger values mean a less reliable output.

pub mod combined;
pub mod consistency;
pub mod information;
pub mod sampling;

mod dispatch;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::record::TargetStrategy;

pub use combined::{additive_cocoa, cocoa, full_sample_cocoa, prob_cocoa};
pub use consistency::{ave_dissimilarity, deg_mat, eig_val_laplacian, num_sem_sets};
pub use dispatch::{score_record, RecordScorer, ScoreSettings, DEFAULT_SAR_TEMPERATURE};
pub use information::{mcnse, mcse, msp, mte, ppl, token_sar, token_sar_weighted};
pub use sampling::{cluster_semantic, sar, semantic_entropy, sentence_sar, SemanticClustering};

/// Single-sequence confidence scores that CoCoA variants can build on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InfoBase {
    Msp,
    Ppl,
    Mte,
}

impl InfoBase {
    pub const ALL: [InfoBase; 3] = [InfoBase::Msp, InfoBase::Ppl, InfoBase::Mte];

    pub fn as_str(self) -> &'static str {
        match self {
            InfoBase::Msp => "msp",
            InfoBase::Ppl => "ppl",
            InfoBase::Mte => "mte",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        InfoBase::ALL.into_iter().find(|b| b.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorId {
    Msp,
    Ppl,
    Mte,
    TokenSar,
    Mcse,
    Mcnse,
    SemanticEntropy,
    SentenceSar,
    Sar,
    DegMat,
    EigValLaplacian,
    NumSemSets,
    AveDissimilarity,
    Cocoa(InfoBase),
    AdditiveCocoa(InfoBase),
    FullSampleCocoa(InfoBase),
    /// Only `Msp` and `Ppl` are valid bases.
    ProbCocoa(InfoBase),
}

impl EstimatorId {
    pub fn all() -> Vec<EstimatorId> {
        use EstimatorId::*;
        let mut v = vec![
            Msp,
            Ppl,
            Mte,
            TokenSar,
            Mcse,
            Mcnse,
            SemanticEntropy,
            SentenceSar,
            Sar,
            DegMat,
            EigValLaplacian,
            NumSemSets,
            AveDissimilarity,
        ];
        v.extend(InfoBase::ALL.map(Cocoa));
        v.extend(InfoBase::ALL.map(AdditiveCocoa));
        v.extend(InfoBase::ALL.map(FullSampleCocoa));
        v.extend([ProbCocoa(InfoBase::Msp), ProbCocoa(InfoBase::Ppl)]);
        v
    }

    pub fn name(self) -> String {
        use EstimatorId::*;
        match self {
            Msp => "msp".into(),
            Ppl => "ppl".into(),
            Mte => "mte".into(),
            TokenSar => "token_sar".into(),
            Mcse => "mcse".into(),
            Mcnse => "mcnse".into(),
            SemanticEntropy => "semantic_entropy".into(),
            SentenceSar => "sentence_sar".into(),
            Sar => "sar".into(),
            DegMat => "deg_mat".into(),
            EigValLaplacian => "eig_val_laplacian".into(),
            NumSemSets => "num_sem_sets".into(),
            AveDissimilarity => "ave_dissimilarity".into(),
            Cocoa(b) => format!("cocoa_{}", b.as_str()),
            AdditiveCocoa(b) => format!("additive_cocoa_{}", b.as_str()),
            FullSampleCocoa(b) => format!("full_sample_cocoa_{}", b.as_str()),
            ProbCocoa(b) => format!("prob_cocoa_{}", b.as_str()),
        }
    }

    /// Whether the estimator scores a selected target sequence (and therefore
    /// depends on the target strategy).
    pub fn uses_target(self) -> bool {
        use EstimatorId::*;
        matches!(
            self,
            Msp | Ppl
                | Mte
                | TokenSar
                | AveDissimilarity
                | Cocoa(_)
                | AdditiveCocoa(_)
                | FullSampleCocoa(_)
                | ProbCocoa(_)
        )
    }

    /// Whether the estimator needs NLI entailment/contradiction scores.
    pub fn needs_nli(self) -> bool {
        matches!(self, EstimatorId::SemanticEntropy | EstimatorId::NumSemSets)
    }

    /// SentenceSAR and SAR may legitimately go negative.
    pub fn may_be_negative(self) -> bool {
        matches!(self, EstimatorId::SentenceSar | EstimatorId::Sar)
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::InvalidArgument(format!("unknown estimator `{s}`"));
        let with_base = |prefix: &str, make: fn(InfoBase) -> EstimatorId| {
            s.strip_prefix(prefix).and_then(InfoBase::parse).map(make)
        };
        let id = if let Some(id) = with_base("prob_cocoa_", EstimatorId::ProbCocoa) {
            if id == EstimatorId::ProbCocoa(InfoBase::Mte) {
                return Err(unknown());
            }
            id
        } else if let Some(id) = with_base("additive_cocoa_", EstimatorId::AdditiveCocoa) {
            id
        } else if let Some(id) = with_base("full_sample_cocoa_", EstimatorId::FullSampleCocoa) {
            id
        } else if let Some(id) = with_base("cocoa_", EstimatorId::Cocoa) {
            id
        } else {
            EstimatorId::all()
                .into_iter()
                .find(|e| e.name() == s)
                .ok_or_else(unknown)?
        };
        Ok(id)
    }
}

impl Serialize for EstimatorId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for EstimatorId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// Every token relevance was zero; TokenSAR used uniform weights.
    UniformRelevanceFallback,
}

/// An uncertainty value plus anything noteworthy about how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub flags: Vec<Flag>,
}

impl Estimate {
    pub fn new(value: f64) -> Self {
        Self { value, flags: Vec::new() }
    }

    pub fn flagged(value: f64, flag: Flag) -> Self {
        Self { value, flags: vec![flag] }
    }
}

impl From<f64> for Estimate {
    fn from(value: f64) -> Self {
        Estimate::new(value)
    }
}

/// One line of the scores file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub record_id: String,
    pub estimator: EstimatorId,
    pub strategy: Option<TargetStrategy>,
    pub value: f64,
    #[serde(default)]
    pub flags: Vec<Flag>,
}

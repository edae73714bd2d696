//! Uncertainty estimation for LLM generations.
//!
//! The crate ingests generation records (prompt, sampled outputs with token
//! log-probabilities, quality scores), computes information-based,
//! consistency-based and combined confidence-consistency uncertainty scores,
//! and evaluates them with prediction-rejection curves.

pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod record;
pub mod similarity;
pub mod spectral;

pub use error::{Error, Result};
pub use estimators::{EstimatorId, EstimatorResult, InfoBase};
pub use record::{GenerationRecord, Sequence, TargetStrategy, TokenObservation};
pub use similarity::{SimilarityBackend, SimilarityContext, SimilarityMatrix};

use std::cell::OnceCell;

use crate::error::{Error, Result};
use crate::record::{select_target, GenerationRecord, Sequence, TargetRef, TargetStrategy};
use crate::similarity::{block_index, NliMatrices, SimilarityContext, SimilarityMatrix};

use super::{
    combined, consistency, information, sampling, Estimate, EstimatorId, EstimatorResult, InfoBase,
};

/// SentenceSAR/SAR temperature used when none is configured.
pub const DEFAULT_SAR_TEMPERATURE: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreSettings {
    pub strategy: TargetStrategy,
    pub temperature: f64,
}

impl Default for ScoreSettings {
    fn default() -> Self {
        Self { strategy: TargetStrategy::Greedy, temperature: DEFAULT_SAR_TEMPERATURE }
    }
}

/// Scores one record with any number of estimators, computing shared pieces
/// (similarity block, NLI scores, per-sample TokenSAR) at most once.
pub struct RecordScorer<'a> {
    record: &'a GenerationRecord,
    settings: ScoreSettings,
    ctx: SimilarityContext<'a>,
    block: OnceCell<SimilarityMatrix>,
    nli: OnceCell<NliMatrices>,
    sample_token_sar: OnceCell<Vec<f64>>,
}

impl<'a> RecordScorer<'a> {
    pub fn new(record: &'a GenerationRecord, settings: ScoreSettings, ctx: SimilarityContext<'a>) -> Self {
        Self {
            record,
            settings,
            ctx,
            block: OnceCell::new(),
            nli: OnceCell::new(),
            sample_token_sar: OnceCell::new(),
        }
    }

    pub fn score(&self, id: EstimatorId) -> Result<EstimatorResult> {
        let estimate = self.estimate(id).map_err(|e| match e {
            Error::MissingEntropy { token_index, .. } => Error::MissingEntropy {
                estimator: id.name(),
                token_index,
            },
            other => other,
        })?;
        if !estimate.value.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "{id} produced a non-finite value for record `{}`",
                self.record.record_id
            )));
        }
        Ok(EstimatorResult {
            record_id: self.record.record_id.clone(),
            estimator: id,
            strategy: id.uses_target().then_some(self.settings.strategy),
            value: estimate.value,
            flags: estimate.flags,
        })
    }

    fn estimate(&self, id: EstimatorId) -> Result<Estimate> {
        use EstimatorId::*;
        let samples = &self.record.samples;
        Ok(match id {
            Msp | Ppl | Mte => self.info(base_of(id))?.into(),
            TokenSar => self.target_token_sar()?,
            Mcse => information::mcse(samples).into(),
            Mcnse => information::mcnse(samples).into(),
            SemanticEntropy => {
                let clustering = sampling::cluster_semantic(self.nli()?);
                sampling::semantic_entropy(&self.sample_log_probs(), &clustering).into()
            }
            NumSemSets => consistency::num_sem_sets(&sampling::cluster_semantic(self.nli()?)).into(),
            SentenceSar => {
                sampling::sentence_sar(&self.sample_log_probs(), &self.sample_matrix()?, self.settings.temperature)?
            }
            Sar => sampling::sar(self.sample_token_sars()?, &self.sample_matrix()?, self.settings.temperature)?,
            DegMat => consistency::deg_mat(&self.sample_matrix()?).into(),
            EigValLaplacian => consistency::eig_val_laplacian(&self.sample_matrix()?)?.into(),
            AveDissimilarity => self.consistency()?.into(),
            Cocoa(b) => combined::cocoa(self.info(b)?, self.consistency()?).into(),
            AdditiveCocoa(b) => combined::additive_cocoa(self.info(b)?, self.consistency()?).into(),
            FullSampleCocoa(b) => {
                combined::full_sample_cocoa(self.info(b)?, consistency::deg_mat(&self.sample_matrix()?)).into()
            }
            ProbCocoa(b) => combined::prob_cocoa(self.info(b)?, self.consistency()?).into(),
        })
    }

    fn target(&self) -> Result<(&'a Sequence, TargetRef)> {
        select_target(self.record, self.settings.strategy)
    }

    fn info(&self, base: InfoBase) -> Result<f64> {
        let (target, _) = self.target()?;
        match base {
            InfoBase::Msp => Ok(information::msp(target)),
            InfoBase::Ppl => Ok(information::ppl(target)),
            InfoBase::Mte => information::mte(target),
        }
    }

    fn consistency(&self) -> Result<f64> {
        let (_, at) = self.target()?;
        let block = self.block()?;
        let t = block_index(self.record, at);
        let off = self.record.block_offset();
        let row: Vec<f64> = (0..self.record.num_samples()).map(|i| block.get(t, off + i)).collect();
        Ok(consistency::ave_dissimilarity(&row))
    }

    fn block(&self) -> Result<&SimilarityMatrix> {
        if let Some(b) = self.block.get() {
            return Ok(b);
        }
        let raw = self.ctx.record_block(self.record)?;
        let m = SimilarityMatrix::from_raw(&raw, self.ctx.backend.clone())?;
        Ok(self.block.get_or_init(|| m))
    }

    fn sample_matrix(&self) -> Result<SimilarityMatrix> {
        let off = self.record.block_offset();
        let idx: Vec<usize> = (off..off + self.record.num_samples()).collect();
        Ok(self.block()?.select(&idx))
    }

    fn nli(&self) -> Result<&NliMatrices> {
        if let Some(n) = self.nli.get() {
            return Ok(n);
        }
        let n = self.ctx.nli(self.record)?;
        Ok(self.nli.get_or_init(|| n))
    }

    fn sample_log_probs(&self) -> Vec<f64> {
        self.record.samples.iter().map(Sequence::log_prob).collect()
    }

    fn sample_token_sars(&self) -> Result<&[f64]> {
        if let Some(v) = self.sample_token_sar.get() {
            return Ok(v);
        }
        let scorer = self.ctx.scorer();
        let values = self
            .record
            .samples
            .iter()
            .map(|s| Ok(information::token_sar(s, &self.record.input_text, &scorer)?.value))
            .collect::<Result<Vec<f64>>>()?;
        Ok(self.sample_token_sar.get_or_init(|| values))
    }

    fn target_token_sar(&self) -> Result<Estimate> {
        let (target, _) = self.target()?;
        information::token_sar(target, &self.record.input_text, &self.ctx.scorer())
    }
}

fn base_of(id: EstimatorId) -> InfoBase {
    match id {
        EstimatorId::Ppl => InfoBase::Ppl,
        EstimatorId::Mte => InfoBase::Mte,
        _ => InfoBase::Msp,
    }
}

/// Scores a single (record, estimator) pair.
pub fn score_record(
    record: &GenerationRecord,
    id: EstimatorId,
    settings: ScoreSettings,
    ctx: SimilarityContext<'_>,
) -> Result<EstimatorResult> {
    RecordScorer::new(record, settings, ctx).score(id)
}

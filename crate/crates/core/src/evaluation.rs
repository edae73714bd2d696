//! Prediction rejection ratio (PRR).
//!
//! Instances are rejected one at a time, most uncertain first, and the mean
//! quality of what remains is tracked up to a rejection cap (50% by default).
//! The area under that curve is compared with the oracle (reject lowest
//! quality first) and random (constant mean quality) baselines:
//!
//! ```text
//! PRR = (AUC_unc − AUC_rnd) / (AUC_oracle − AUC_rnd)
//! ```
//!
//! The grid is discrete: point k has exactly k instances rejected, k = 0..K
//! with K = ⌊n · max_rejection⌋, and each AUC is the mean of its K+1 points.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_REJECTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredInstance {
    pub record_id: String,
    pub uncertainty: f64,
    pub quality: f64,
}

impl ScoredInstance {
    pub fn new(record_id: impl Into<String>, uncertainty: f64, quality: f64) -> Self {
        Self { record_id: record_id.into(), uncertainty, quality }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ranking {
    Estimator,
    Oracle,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub rejection: f64,
    pub estimator: f64,
    pub oracle: f64,
    pub random: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrrReport {
    pub n: usize,
    pub max_rejection: f64,
    pub auc_unc: f64,
    pub auc_oracle: f64,
    pub auc_rnd: f64,
    pub prr: f64,
    pub curve: Vec<CurvePoint>,
}

impl PrrReport {
    /// Writes the curves as CSV with header `rejection,estimator,oracle,random`.
    pub fn write_curve_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "rejection,estimator,oracle,random")?;
        for p in &self.curve {
            writeln!(out, "{},{},{},{}", p.rejection, p.estimator, p.oracle, p.random)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn validate(instances: &[ScoredInstance], max_rejection: f64) -> Result<()> {
    if instances.len() < 2 {
        return Err(Error::TooFewInstances(instances.len()));
    }
    if !(max_rejection > 0.0 && max_rejection <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "max_rejection must lie in (0, 1], got {max_rejection}"
        )));
    }
    for inst in instances {
        if !inst.uncertainty.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "record `{}`: uncertainty {} is not finite",
                inst.record_id, inst.uncertainty
            )));
        }
        if !inst.quality.is_finite() || !(0.0..=1.0).contains(&inst.quality) {
            return Err(Error::InvalidArgument(format!(
                "record `{}`: quality {} outside [0, 1]",
                inst.record_id, inst.quality
            )));
        }
    }
    Ok(())
}

/// Qualities ordered from first-kept to first-rejected.
fn keep_order(instances: &[ScoredInstance], ranking: Ranking) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..instances.len()).collect();
    match ranking {
        Ranking::Estimator => idx.sort_by(|&a, &b| {
            let (x, y) = (&instances[a], &instances[b]);
            // numeric order, so -0.0 and 0.0 tie; inputs are validated finite
            x.uncertainty
                .partial_cmp(&y.uncertainty)
                .expect("finite uncertainty")
                .then_with(|| x.record_id.cmp(&y.record_id))
        }),
        Ranking::Oracle => idx.sort_by(|&a, &b| {
            instances[b].quality.partial_cmp(&instances[a].quality).expect("finite quality")
        }),
        Ranking::Random => {}
    }
    idx.into_iter().map(|i| instances[i].quality).collect()
}

fn retained_means(order: &[f64], k_max: usize) -> Vec<f64> {
    let n = order.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for q in order {
        prefix.push(prefix.last().copied().unwrap_or(0.0) + q);
    }
    (0..=k_max).map(|k| prefix[n - k] / (n - k) as f64).collect()
}

fn max_rejected(n: usize, max_rejection: f64) -> usize {
    ((n as f64 * max_rejection).floor() as usize).min(n - 1)
}

/// Points (rejected fraction, mean retained quality) for one ranking.
pub fn rejection_curve(
    instances: &[ScoredInstance],
    ranking: Ranking,
    max_rejection: f64,
) -> Result<Vec<(f64, f64)>> {
    validate(instances, max_rejection)?;
    let n = instances.len();
    let k_max = max_rejected(n, max_rejection);
    let values = match ranking {
        Ranking::Random => {
            let mean = retained_means(&keep_order(instances, Ranking::Random), 0)[0];
            vec![mean; k_max + 1]
        }
        r => retained_means(&keep_order(instances, r), k_max),
    };
    Ok(values
        .into_iter()
        .enumerate()
        .map(|(k, v)| (k as f64 / n as f64, v))
        .collect())
}

fn mean(values: &[(f64, f64)]) -> f64 {
    values.iter().map(|(_, v)| v).sum::<f64>() / values.len() as f64
}

pub fn prr(instances: &[ScoredInstance], max_rejection: f64) -> Result<PrrReport> {
    let unc = rejection_curve(instances, Ranking::Estimator, max_rejection)?;
    let oracle = rejection_curve(instances, Ranking::Oracle, max_rejection)?;
    let random = rejection_curve(instances, Ranking::Random, max_rejection)?;
    let (auc_unc, auc_oracle, auc_rnd) = (mean(&unc), mean(&oracle), mean(&random));
    debug_assert!(auc_unc <= auc_oracle + 1e-12);

    let denom = auc_oracle - auc_rnd;
    if !(denom > 0.0) {
        return Err(Error::UndefinedPrr);
    }
    let curve = unc
        .iter()
        .zip(&oracle)
        .zip(&random)
        .map(|((&(rejection, e), &(_, o)), &(_, r))| CurvePoint { rejection, estimator: e, oracle: o, random: r })
        .collect();
    Ok(PrrReport {
        n: instances.len(),
        max_rejection,
        auc_unc,
        auc_oracle,
        auc_rnd,
        prr: (auc_unc - auc_rnd) / denom,
        curve,
    })
}

/// Unweighted mean of the PRRs of a group's datasets. `None` marks a dataset
/// whose PRR is undefined; it makes the whole group an error.
pub fn aggregate_group(group: &str, datasets: &[String], prr_by_dataset: &BTreeMap<String, Option<f64>>) -> Result<f64> {
    if datasets.is_empty() {
        return Err(Error::InvalidArgument(format!("task group `{group}` is empty")));
    }
    let mut total = 0.0;
    for d in datasets {
        match prr_by_dataset.get(d) {
            Some(Some(v)) => total += v,
            Some(None) => {
                return Err(Error::PoisonedGroup { group: group.to_string(), dataset: d.clone() })
            }
            None => {
                return Err(Error::InvalidArgument(format!(
                    "task group `{group}` names unknown dataset `{d}`"
                )))
            }
        }
    }
    Ok(total / datasets.len() as f64)
}

pub fn aggregate_mean_prr(
    prr_by_dataset: &BTreeMap<String, Option<f64>>,
    groups: &BTreeMap<String, Vec<String>>,
) -> BTreeMap<String, Result<f64>> {
    groups
        .iter()
        .map(|(g, ds)| (g.clone(), aggregate_group(g, ds, prr_by_dataset)))
        .collect()
}

/// Task grouping used for the summary tables: QA, translation and
/// summarization datasets.
pub fn default_task_groups() -> BTreeMap<String, Vec<String>> {
    let group = |ds: &[&str]| ds.iter().map(|d| d.to_string()).collect::<Vec<_>>();
    BTreeMap::from([
        ("qa".to_string(), group(&["triviaqa", "mmlu", "coqa", "gsm8k"])),
        ("nmt".to_string(), group(&["wmt14_fren", "wmt19_deen"])),
        ("sum".to_string(), group(&["xsum"])),
    ])
}

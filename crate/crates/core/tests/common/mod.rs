#![allow(dead_code)]

use std::collections::BTreeMap;

use cocoa_core::record::{GenerationRecord, Sequence, TokenObservation};
use rand::Rng;

const WORDS: [&str; 8] = ["paris", "london", "is", "the", "capital", "of", "france", "maybe"];

pub fn random_sequence<R: Rng>(rng: &mut R, max_len: usize) -> Sequence {
    let len = rng.gen_range(1..=max_len);
    let tokens = (0..len)
        .map(|i| {
            let w = WORDS[rng.gen_range(0..WORDS.len())];
            let text = if i == 0 { w.to_string() } else { format!(" {w}") };
            let lp = -rng.gen_range(0.0..4.0f64);
            let h = rng.gen_range(0.0..3.0f64);
            TokenObservation::new(text, lp, Some(h))
        })
        .collect();
    Sequence::from_tokens(tokens)
}

/// Directional NLI blocks from latent meaning labels (an equivalence
/// relation, so clustering is order independent).
pub fn labelled_nli<R: Rng>(rng: &mut R, labels: &[usize]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = labels.len();
    let mut entail = vec![vec![1.0; n]; n];
    let mut contra_g = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if labels[i] == labels[j] {
                entail[i][j] = rng.gen_range(0.6..1.0);
                contra_g[i][j] = rng.gen_range(0.8..1.0);
            } else {
                entail[i][j] = rng.gen_range(0.0..0.3);
                contra_g[i][j] = rng.gen_range(0.0..0.5);
            }
        }
    }
    (entail, contra_g)
}

/// Random record with greedy, `m` samples, and labelled NLI blocks.
pub fn random_record<R: Rng>(rng: &mut R, id: usize, m: usize, max_len: usize) -> GenerationRecord {
    let greedy = random_sequence(rng, max_len);
    let samples: Vec<Sequence> = (0..m).map(|_| random_sequence(rng, max_len)).collect();
    let labels: Vec<usize> = (0..=m).map(|_| rng.gen_range(0..3)).collect();
    let (entail, contra) = labelled_nli(rng, &labels);
    GenerationRecord {
        record_id: format!("rec{id:04}"),
        input_text: "what is the capital of france".into(),
        greedy: Some(greedy),
        samples,
        quality: BTreeMap::from([
            ("greedy".to_string(), rng.gen_range(0.0..=1.0)),
            ("best".to_string(), rng.gen_range(0.0..=1.0)),
        ]),
        precomputed_sim: Some(BTreeMap::from([
            ("nli_entail".to_string(), entail),
            ("nli_contra".to_string(), contra),
        ])),
    }
}

/// Reorders samples (and the sample part of every precomputed block).
pub fn permute_samples(record: &GenerationRecord, perm: &[usize]) -> GenerationRecord {
    let mut out = record.clone();
    out.samples = perm.iter().map(|&i| record.samples[i].clone()).collect();
    let off = record.block_offset();
    let mut order: Vec<usize> = (0..off).collect();
    order.extend(perm.iter().map(|&i| i + off));
    if let Some(blocks) = &mut out.precomputed_sim {
        for block in blocks.values_mut() {
            let old = block.clone();
            for (a, &i) in order.iter().enumerate() {
                for (b, &j) in order.iter().enumerate() {
                    block[a][b] = old[i][j];
                }
            }
        }
    }
    out
}

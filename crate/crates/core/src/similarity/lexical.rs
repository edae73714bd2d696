//! Word-level lexical similarities.
//!
//! Words are produced by lowercasing, splitting on Unicode whitespace and
//! trimming non-alphanumeric characters from both ends of each piece; pieces
//! that become empty are dropped.

use std::collections::HashSet;

pub fn words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// |W(a) ∩ W(b)| / |W(a) ∪ W(b)| over word sets; 1 when both are empty.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let wa: HashSet<String> = words(a).into_iter().collect();
    let wb: HashSet<String> = words(b).into_iter().collect();
    let union = wa.union(&wb).count();
    if union == 0 {
        return 1.0;
    }
    wa.intersection(&wb).count() as f64 / union as f64
}

/// ROUGE-L F1 over word sequences.
///
/// With P = LCS/|b| and R = LCS/|a|, F = 2PR/(P+R) reduces to
/// 2·LCS/(|a|+|b|), which is what is computed (and is exactly symmetric).
pub fn rouge_l(a: &str, b: &str) -> f64 {
    let wa = words(a);
    let wb = words(b);
    if wa.is_empty() || wb.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(&wa, &wb);
    if lcs == 0 {
        return 0.0;
    }
    2.0 * lcs as f64 / (wa.len() + wb.len()) as f64
}

fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

//! Generation records: the data model, JSONL ingestion with validation, and
//! target-sequence selection.
//!
//! A record holds one prompt, the `M` sequences sampled for it (in generation
//! order), an optional greedy decode, and the quality score of each target
//! strategy. Records are immutable once loaded.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One generated token with its log-probability (nats) and, optionally, the
/// entropy of the full next-token distribution at that step (nats).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenObservation {
    pub text: String,
    pub log_prob: f64,
    #[serde(default)]
    pub dist_entropy: Option<f64>,
}

impl TokenObservation {
    pub fn new(text: impl Into<String>, log_prob: f64, dist_entropy: Option<f64>) -> Self {
        Self {
            text: text.into(),
            log_prob,
            dist_entropy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub tokens: Vec<TokenObservation>,
    /// Detokenized output. When absent from the input it is the concatenation
    /// of the token texts.
    #[serde(default)]
    pub text: String,
}

impl Sequence {
    /// Builds a sequence whose text is the concatenation of its token texts.
    pub fn from_tokens(tokens: Vec<TokenObservation>) -> Self {
        let text = tokens.iter().map(|t| t.text.as_str()).collect();
        Self { tokens, text }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// log P(y | x): the sum of the token log-probabilities.
    pub fn log_prob(&self) -> f64 {
        seq_log_prob(self)
    }

    /// Length-normalized log-probability, log P(y | x) / L.
    pub fn normalized_log_prob(&self) -> f64 {
        seq_log_prob(self) / self.tokens.len() as f64
    }

    fn validate(&self, line: usize, record_id: &str, field: &str) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::schema(line, record_id, field, "sequence has no tokens"));
        }
        for (i, tok) in self.tokens.iter().enumerate() {
            if !tok.log_prob.is_finite() || tok.log_prob > 0.0 {
                return Err(Error::schema(
                    line,
                    record_id,
                    format!("{field}.tokens[{i}].log_prob"),
                    format!("log_prob must be finite and <= 0, got {}", tok.log_prob),
                ));
            }
            if let Some(h) = tok.dist_entropy {
                if !h.is_finite() || h < 0.0 {
                    return Err(Error::schema(
                        line,
                        record_id,
                        format!("{field}.tokens[{i}].dist_entropy"),
                        format!("dist_entropy must be finite and >= 0, got {h}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Exact sum of the token log-probabilities of `seq`.
pub fn seq_log_prob(seq: &Sequence) -> f64 {
    seq.tokens.iter().map(|t| t.log_prob).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub record_id: String,
    pub input_text: String,
    #[serde(default)]
    pub greedy: Option<Sequence>,
    pub samples: Vec<Sequence>,
    #[serde(default)]
    pub quality: BTreeMap<String, f64>,
    /// Raw (unsymmetrized) similarity blocks keyed by backend name. Row and
    /// column 0 is the greedy sequence when present, followed by the samples.
    #[serde(default)]
    pub precomputed_sim: Option<BTreeMap<String, Vec<Vec<f64>>>>,
}

impl GenerationRecord {
    pub fn num_samples(&self) -> usize {
        self.samples.len()
    }

    /// Offset of sample 0 inside a precomputed block.
    pub fn block_offset(&self) -> usize {
        usize::from(self.greedy.is_some())
    }

    pub fn precomputed(&self, backend: &str) -> Option<&Vec<Vec<f64>>> {
        self.precomputed_sim.as_ref().and_then(|m| m.get(backend))
    }

    pub fn validate(&self, line: usize) -> Result<()> {
        let id = self.record_id.as_str();
        if id.is_empty() {
            return Err(Error::schema(line, id, "record_id", "must be non-empty"));
        }
        if self.samples.is_empty() {
            return Err(Error::schema(line, id, "samples", "at least one sample is required"));
        }
        if let Some(greedy) = &self.greedy {
            greedy.validate(line, id, "greedy")?;
        }
        for (i, s) in self.samples.iter().enumerate() {
            s.validate(line, id, &format!("samples[{i}]"))?;
        }
        for (name, q) in &self.quality {
            if !q.is_finite() || !(0.0..=1.0).contains(q) {
                return Err(Error::schema(
                    line,
                    id,
                    format!("quality.{name}"),
                    format!("quality must lie in [0, 1], got {q}"),
                ));
            }
        }
        if let Some(blocks) = &self.precomputed_sim {
            let n = self.samples.len() + self.block_offset();
            for (name, rows) in blocks {
                let field = format!("precomputed_sim.{name}");
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::schema(
                        line,
                        id,
                        field,
                        format!("expected a {n}x{n} matrix"),
                    ));
                }
                if rows.iter().flatten().any(|v| !v.is_finite() || !(0.0..=1.0).contains(v)) {
                    return Err(Error::schema(line, id, field, "entries must lie in [0, 1]"));
                }
            }
        }
        Ok(())
    }
}

/// Which sequence of a record is treated as the answer being scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetStrategy {
    Greedy,
    Random,
    Best,
    BestNormalized,
}

impl TargetStrategy {
    pub const ALL: [TargetStrategy; 4] = [
        TargetStrategy::Greedy,
        TargetStrategy::Random,
        TargetStrategy::Best,
        TargetStrategy::BestNormalized,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TargetStrategy::Greedy => "greedy",
            TargetStrategy::Random => "random",
            TargetStrategy::Best => "best",
            TargetStrategy::BestNormalized => "best_normalized",
        }
    }
}

impl fmt::Display for TargetStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TargetStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TargetStrategy::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown target strategy `{s}`")))
    }
}

/// Where a selected target lives inside its record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetRef {
    Greedy,
    Sample(usize),
}

/// Picks the target sequence. Ties in `best`/`best_normalized` go to the
/// lowest sample index; `random` is always sample 0.
pub fn select_target(
    record: &GenerationRecord,
    strategy: TargetStrategy,
) -> Result<(&Sequence, TargetRef)> {
    let pick_max = |score: fn(&Sequence) -> f64| {
        let mut best = 0;
        let mut best_score = score(&record.samples[0]);
        for (i, s) in record.samples.iter().enumerate().skip(1) {
            let v = score(s);
            if v > best_score {
                best = i;
                best_score = v;
            }
        }
        best
    };
    let index = match strategy {
        TargetStrategy::Greedy => {
            return record
                .greedy
                .as_ref()
                .map(|g| (g, TargetRef::Greedy))
                .ok_or_else(|| Error::MissingGreedy(record.record_id.clone()));
        }
        TargetStrategy::Random => 0,
        TargetStrategy::Best => pick_max(Sequence::log_prob),
        TargetStrategy::BestNormalized => pick_max(Sequence::normalized_log_prob),
    };
    Ok((&record.samples[index], TargetRef::Sample(index)))
}

/// Streams validated records from a JSONL source. Blank lines are skipped.
pub struct RecordReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    seen: HashSet<String>,
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line_no: 0,
            seen: HashSet::new(),
        }
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<GenerationRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some(self.parse(&line));
        }
    }
}

impl<R: BufRead> RecordReader<R> {
    fn parse(&mut self, line: &str) -> Result<GenerationRecord> {
        let mut record: GenerationRecord =
            serde_json::from_str(line).map_err(|e| classify_json_error(self.line_no, line, e))?;
        for seq in record.greedy.iter_mut().chain(record.samples.iter_mut()) {
            if seq.text.is_empty() {
                seq.text = seq.tokens.iter().map(|t| t.text.as_str()).collect();
            }
        }
        record.validate(self.line_no)?;
        if !self.seen.insert(record.record_id.clone()) {
            return Err(Error::DuplicateRecord {
                line: self.line_no,
                record_id: record.record_id,
            });
        }
        Ok(record)
    }
}

fn classify_json_error(line_no: usize, line: &str, err: serde_json::Error) -> Error {
    use serde_json::error::Category;
    match err.classify() {
        Category::Data => {
            let record_id = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("record_id").and_then(|id| id.as_str().map(String::from)))
                .unwrap_or_default();
            Error::schema(line_no, record_id, "<schema>", err.to_string())
        }
        _ => Error::MalformedJson {
            line: line_no,
            message: err.to_string(),
        },
    }
}

/// Opens a JSONL file of records.
pub fn load_records(path: impl AsRef<Path>) -> Result<RecordReader<BufReader<File>>> {
    Ok(RecordReader::new(BufReader::new(File::open(path)?)))
}

/// Reads and validates every record in the file.
pub fn read_all(path: impl AsRef<Path>) -> Result<Vec<GenerationRecord>> {
    load_records(path)?.collect()
}

pub fn write_records<'a, W: Write>(
    mut out: W,
    records: impl IntoIterator<Item = &'a GenerationRecord>,
) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

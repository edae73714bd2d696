//! Client for remote similarity providers.
//!
//! Wire contract: `POST {endpoint}/similarity` with
//! `{"backend": str, "pairs": [[a, b], ...]}`, answered by
//! `{"scores": [float, ...]}` aligned with the request pairs. Scores must lie
//! in `[0, 1]`. The client deduplicates pairs, serves repeats from a
//! [`SimilarityCache`], splits the rest into batches and keeps a bounded
//! number of batches in flight.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::cache::SimilarityCache;
use crate::error::{Error, Result};

/// Environment variable consulted when no endpoint is configured.
pub const ENDPOINT_ENV: &str = "COCOA_SIM_ENDPOINT";

#[derive(Debug)]
pub enum TransportError {
    /// Worth retrying: connection failures, timeouts, 5xx.
    Transient(String),
    /// Not worth retrying.
    Fatal(String),
}

/// Sends one batch to a provider and returns its raw scores.
pub trait Transport: Send + Sync {
    fn post(&self, backend: &str, pairs: &[(String, String)]) -> std::result::Result<Vec<f64>, TransportError>;
}

#[derive(Serialize)]
struct SimilarityRequest<'a> {
    backend: &'a str,
    pairs: &'a [(String, String)],
}

#[derive(Deserialize)]
struct SimilarityResponse {
    scores: Vec<f64>,
}

pub struct HttpTransport {
    url: String,
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(endpoint: &str) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot build HTTP client: {e}")))?;
        Ok(Self {
            url: format!("{}/similarity", endpoint.trim_end_matches('/')),
            client,
        })
    }
}

impl Transport for HttpTransport {
    fn post(&self, backend: &str, pairs: &[(String, String)]) -> std::result::Result<Vec<f64>, TransportError> {
        let resp = self
            .client
            .post(&self.url)
            .json(&SimilarityRequest { backend, pairs })
            .send()
            .map_err(|e| TransportError::Transient(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() {
            return Err(TransportError::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(TransportError::Fatal(format!("HTTP {status}: {body}")));
        }
        let body: SimilarityResponse = resp
            .json()
            .map_err(|e| TransportError::Fatal(format!("undecodable response: {e}")))?;
        Ok(body.scores)
    }
}

#[derive(Debug, Clone)]
pub struct ProviderConfig {
    pub batch_size: usize,
    pub max_attempts: usize,
    /// Delay before the second attempt; doubles on every further attempt.
    pub backoff: Duration,
    pub max_in_flight: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            max_attempts: 3,
            backoff: Duration::from_millis(200),
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProviderStats {
    /// Batches that reached the transport, including retries.
    pub requests: usize,
    pub pairs_sent: usize,
    pub cache_hits: usize,
}

pub struct ProviderClient {
    transport: Box<dyn Transport>,
    cache: Arc<SimilarityCache>,
    config: ProviderConfig,
    requests: AtomicUsize,
    pairs_sent: AtomicUsize,
    cache_hits: AtomicUsize,
}

impl ProviderClient {
    pub fn new(transport: Box<dyn Transport>, cache: Arc<SimilarityCache>, config: ProviderConfig) -> Self {
        Self {
            transport,
            cache,
            config,
            requests: AtomicUsize::new(0),
            pairs_sent: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
        }
    }

    pub fn http(endpoint: &str, cache: Arc<SimilarityCache>, config: ProviderConfig) -> Result<Self> {
        Ok(Self::new(Box::new(HttpTransport::new(endpoint)?), cache, config))
    }

    pub fn cache(&self) -> &Arc<SimilarityCache> {
        &self.cache
    }

    pub fn stats(&self) -> ProviderStats {
        ProviderStats {
            requests: self.requests.load(Ordering::Relaxed),
            pairs_sent: self.pairs_sent.load(Ordering::Relaxed),
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
        }
    }

    /// Scores `pairs` with `backend`, order-aligned with the input.
    pub fn score(&self, backend: &str, pairs: &[(&str, &str)]) -> Result<Vec<f64>> {
        let keys: Vec<String> = pairs
            .iter()
            .map(|(a, b)| SimilarityCache::key(backend, a, b))
            .collect();

        let mut missing: Vec<(String, String)> = Vec::new();
        let mut missing_keys: HashMap<&str, usize> = HashMap::new();
        for (key, (a, b)) in keys.iter().zip(pairs) {
            if self.cache.get(key).is_some() {
                self.cache_hits.fetch_add(1, Ordering::Relaxed);
            } else if !missing_keys.contains_key(key.as_str()) {
                missing_keys.insert(key, missing.len());
                missing.push((a.to_string(), b.to_string()));
            }
        }

        if !missing.is_empty() {
            let scores = self.fetch(backend, &missing)?;
            for (key, &slot) in &missing_keys {
                self.cache.insert(key.to_string(), scores[slot]);
            }
        }

        keys.iter()
            .map(|k| {
                self.cache
                    .get(k)
                    .ok_or_else(|| Error::ProtocolViolation("score vanished from cache".into()))
            })
            .collect()
    }

    fn fetch(&self, backend: &str, pairs: &[(String, String)]) -> Result<Vec<f64>> {
        let batches: Vec<&[(String, String)]> = pairs.chunks(self.config.batch_size.max(1)).collect();
        let results: Vec<Mutex<Option<Result<Vec<f64>>>>> =
            (0..batches.len()).map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.config.max_in_flight.clamp(1, batches.len());

        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= batches.len() {
                        break;
                    }
                    let r = self.fetch_batch(backend, batches[i]);
                    let failed = r.is_err();
                    *results[i].lock().expect("result slot") = Some(r);
                    if failed {
                        next.store(batches.len(), Ordering::Relaxed);
                        break;
                    }
                });
            }
        });

        let mut out = Vec::with_capacity(pairs.len());
        for r in results.into_iter().filter_map(|m| m.into_inner().expect("result slot")) {
            out.extend(r?);
        }
        if out.len() != pairs.len() {
            return Err(Error::Provider {
                attempts: self.config.max_attempts,
                message: "batch aborted after an earlier failure".into(),
            });
        }
        Ok(out)
    }

    fn fetch_batch(&self, backend: &str, batch: &[(String, String)]) -> Result<Vec<f64>> {
        let attempts = self.config.max_attempts.max(1);
        let mut delay = self.config.backoff;
        let mut last = String::new();
        for attempt in 1..=attempts {
            self.requests.fetch_add(1, Ordering::Relaxed);
            self.pairs_sent.fetch_add(batch.len(), Ordering::Relaxed);
            match self.transport.post(backend, batch) {
                Ok(scores) => return check_scores(batch.len(), scores),
                Err(TransportError::Fatal(m)) => {
                    return Err(Error::Provider { attempts: attempt, message: m })
                }
                Err(TransportError::Transient(m)) => last = m,
            }
            if attempt < attempts {
                thread::sleep(delay);
                delay *= 2;
            }
        }
        Err(Error::Provider { attempts, message: last })
    }
}

fn check_scores(expected: usize, scores: Vec<f64>) -> Result<Vec<f64>> {
    if scores.len() != expected {
        return Err(Error::ProtocolViolation(format!(
            "expected {expected} scores, got {}",
            scores.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite() || !(0.0..=1.0).contains(*s)) {
        return Err(Error::ProtocolViolation(format!("score {bad} outside [0, 1]")));
    }
    Ok(scores)
}

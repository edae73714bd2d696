//! Provider wire contract against an in-process HTTP stub.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use cocoa_core::estimators::{score_record, EstimatorId, ScoreSettings};
use cocoa_core::record::{GenerationRecord, Sequence, TokenObservation};
use cocoa_core::similarity::{ProviderClient, ProviderConfig, SimilarityBackend, SimilarityCache, SimilarityContext};
use cocoa_core::Error;
use serde_json::{json, Value};

type Handler = dyn Fn(&Value) -> (u16, String) + Send + Sync;

struct Stub {
    endpoint: String,
    hits: Arc<AtomicUsize>,
    bodies: Arc<Mutex<Vec<Value>>>,
}

fn serve(handler: Box<Handler>) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let bodies = Arc::new(Mutex::new(Vec::new()));
    let (h, b) = (hits.clone(), bodies.clone());
    let handler: Arc<Handler> = Arc::from(handler);
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let (h, b, handler) = (h.clone(), b.clone(), handler.clone());
            thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                reader.read_line(&mut request_line).unwrap();
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                assert!(request_line.starts_with("POST /similarity "), "{request_line}");
                let body: Value = serde_json::from_slice(&body).unwrap();
                h.fetch_add(1, Ordering::SeqCst);
                b.lock().unwrap().push(body.clone());
                let (status, payload) = handler(&body);
                let resp = format!(
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{payload}",
                    payload.len()
                );
                stream.write_all(resp.as_bytes()).unwrap();
            });
        }
    });
    Stub { endpoint, hits, bodies }
}

/// Scores a pair as the fraction of shared characters, well inside [0, 1].
fn overlap(a: &str, b: &str) -> f64 {
    let shared = a.chars().filter(|c| b.contains(*c)).count();
    shared as f64 / (a.len().max(b.len()).max(1) as f64) * 0.9
}

fn scoring_handler(body: &Value) -> (u16, String) {
    let scores: Vec<f64> = body["pairs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| overlap(p[0].as_str().unwrap(), p[1].as_str().unwrap()))
        .collect();
    (200, json!({ "scores": scores }).to_string())
}

fn fast() -> ProviderConfig {
    ProviderConfig { backoff: Duration::from_millis(5), batch_size: 4, ..ProviderConfig::default() }
}

fn client(endpoint: &str) -> ProviderClient {
    ProviderClient::http(endpoint, Arc::new(SimilarityCache::new()), fast()).unwrap()
}

#[test]
fn request_body_and_order_follow_the_contract() {
    let stub = serve(Box::new(scoring_handler));
    let c = client(&stub.endpoint);
    let pairs = [("abc", "abd"), ("xyz", "abc"), ("hello", "help"), ("a", "a"), ("qq", "q")];
    let got = c.score("cross_encoder", &pairs).unwrap();
    let want: Vec<f64> = pairs.iter().map(|(a, b)| overlap(a, b)).collect();
    assert_eq!(got, want);
    let bodies = stub.bodies.lock().unwrap();
    assert_eq!(bodies.len(), 2);
    assert_eq!(bodies[0]["backend"], "cross_encoder");
    assert!(bodies.iter().all(|b| b["pairs"].as_array().unwrap().len() <= 4));
}

#[test]
fn server_errors_are_retried() {
    let calls = Arc::new(AtomicUsize::new(0));
    let c2 = calls.clone();
    let stub = serve(Box::new(move |body| {
        if c2.fetch_add(1, Ordering::SeqCst) < 2 {
            (503, "{}".into())
        } else {
            scoring_handler(body)
        }
    }));
    let c = client(&stub.endpoint);
    assert_eq!(c.score("nli_entail", &[("ab", "ab")]).unwrap(), vec![0.9]);
    assert_eq!(stub.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn persistent_failure_aborts_after_bounded_attempts() {
    let stub = serve(Box::new(|_| (500, "{}".into())));
    let c = client(&stub.endpoint);
    let err = c.score("nli_entail", &[("a", "b")]).unwrap_err();
    assert!(matches!(err, Error::Provider { attempts: 3, .. }));
    assert_eq!(stub.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let stub = serve(Box::new(|_| (400, r#"{"error":"bad"}"#.into())));
    let c = client(&stub.endpoint);
    assert!(matches!(c.score("nli_entail", &[("a", "b")]), Err(Error::Provider { attempts: 1, .. })));
    assert_eq!(stub.hits.load(Ordering::SeqCst), 1);
}

#[test]
fn out_of_range_and_short_responses_are_protocol_violations() {
    let stub = serve(Box::new(|_| (200, r#"{"scores":[1.2]}"#.into())));
    assert!(matches!(client(&stub.endpoint).score("x", &[("a", "b")]), Err(Error::ProtocolViolation(_))));
    let stub = serve(Box::new(|_| (200, r#"{"scores":[]}"#.into())));
    assert!(matches!(client(&stub.endpoint).score("x", &[("a", "b")]), Err(Error::ProtocolViolation(_))));
}

#[test]
fn unreachable_endpoint_is_provider_error() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let err = client(&endpoint).score("x", &[("a", "b")]).unwrap_err();
    assert!(err.is_provider());
}

fn seq(text: &str) -> Sequence {
    Sequence::from_tokens(vec![TokenObservation::new(text, -0.5, None)])
}

#[test]
fn cache_is_transparent_and_persistent() {
    let stub = serve(Box::new(scoring_handler));
    let record = GenerationRecord {
        record_id: "r".into(),
        input_text: "q".into(),
        greedy: Some(seq("alpha")),
        samples: vec![seq("alpine"), seq("beta"), seq("alps")],
        quality: Default::default(),
        precomputed_sim: None,
    };
    let backend = SimilarityBackend::CrossEncoder;
    let dir = tempfile::tempdir().unwrap();
    let cache_path = dir.path().join("cache.jsonl");

    let cold = client(&stub.endpoint);
    let ctx = SimilarityContext::new(&backend, Some(&cold));
    let v1 = score_record(&record, EstimatorId::DegMat, ScoreSettings::default(), ctx).unwrap().value;
    let hits_after_first = stub.hits.load(Ordering::SeqCst);
    let v2 = score_record(&record, EstimatorId::DegMat, ScoreSettings::default(), ctx).unwrap().value;
    assert_eq!(v1, v2);
    assert_eq!(stub.hits.load(Ordering::SeqCst), hits_after_first);
    cold.cache().save(&cache_path).unwrap();

    let warm = ProviderClient::http("http://127.0.0.1:9", Arc::new(SimilarityCache::load(&cache_path).unwrap()), fast()).unwrap();
    let v3 = score_record(&record, EstimatorId::DegMat, ScoreSettings::default(), SimilarityContext::new(&backend, Some(&warm)))
        .unwrap()
        .value;
    assert_eq!(v3, v1);
    assert_eq!(warm.stats().requests, 0);
}

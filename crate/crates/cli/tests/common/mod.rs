#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use serde_json::{json, Value};

pub fn cocoa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cocoa"))
        .args(args)
        .current_dir(dir)
        .env_remove("COCOA_SIM_ENDPOINT")
        .output()
        .expect("binary runs")
}

/// Runs and asserts success.
pub fn ok(dir: &Path, args: &[&str]) {
    let out = cocoa(dir, args);
    assert!(
        out.status.success(),
        "cocoa {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub struct Stub {
    pub endpoint: String,
    pub hits: Arc<AtomicUsize>,
}

impl Stub {
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

/// Deterministic stand-in for the neural provider: scores depend only on the
/// backend and the two texts.
pub fn stub_score(backend: &str, a: &str, b: &str) -> f64 {
    let same_head = a.split_whitespace().next() == b.split_whitespace().next();
    match backend {
        "nli_entail" => if same_head { 0.9 } else { 0.1 },
        "nli_contra" => if same_head { 0.95 } else { 0.2 },
        _ => {
            let shared = a.chars().filter(|c| b.contains(*c)).count();
            shared as f64 / (a.len().max(b.len()).max(1) as f64) * 0.9
        }
    }
}

pub fn serve() -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let h = hits.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let h = h.clone();
            thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let mut len = 0;
                loop {
                    let mut header = String::new();
                    reader.read_line(&mut header).unwrap();
                    if header == "\r\n" || header.is_empty() {
                        break;
                    }
                    if let Some(v) = header.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                let body: Value = serde_json::from_slice(&body).unwrap();
                h.fetch_add(1, Ordering::SeqCst);
                let backend = body["backend"].as_str().unwrap();
                let scores: Vec<f64> = body["pairs"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|p| stub_score(backend, p[0].as_str().unwrap(), p[1].as_str().unwrap()))
                    .collect();
                let payload = json!({ "scores": scores }).to_string();
                let resp = format!(
                    "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{payload}",
                    payload.len()
                );
                stream.write_all(resp.as_bytes()).unwrap();
            });
        }
    });
    Stub { endpoint, hits }
}

fn tokens(text: &str, lp: f64) -> Value {
    let toks: Vec<Value> = text
        .split(' ')
        .enumerate()
        .map(|(i, w)| {
            let t = if i == 0 { w.to_string() } else { format!(" {w}") };
            json!({ "text": t, "log_prob": lp, "dist_entropy": -lp })
        })
        .collect();
    json!({ "tokens": toks })
}

/// A hand-written record; quality covers greedy and best.
pub fn record(id: &str, greedy: &str, samples: &[&str], lp: f64, quality: f64) -> Value {
    json!({
        "record_id": id,
        "input_text": format!("question {id}"),
        "greedy": tokens(greedy, lp),
        "samples": samples.iter().map(|s| tokens(s, lp - 0.1)).collect::<Vec<_>>(),
        "quality": { "greedy": quality, "best": quality },
    })
}

pub fn write_jsonl(path: &Path, rows: &[Value]) {
    let text: String = rows.iter().map(|r| format!("{r}\n")).collect();
    std::fs::write(path, text).unwrap();
}

pub fn read_jsonl(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

pub fn small_dataset(path: &Path, offset: usize) {
    let rows: Vec<Value> = (0..6)
        .map(|i| {
            let k = i + offset;
            let q = ((k * 37) % 10) as f64 / 10.0;
            record(
                &format!("r{k}"),
                &format!("paris is the capital {k}"),
                &["paris is the capital", "lyon is a city", &format!("paris capital {}", k % 3)],
                -0.1 - 0.05 * (k % 4) as f64,
                q,
            )
        })
        .collect();
    write_jsonl(path, &rows);
}

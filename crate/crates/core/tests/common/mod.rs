#![allow(dead_code)]

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use itrg::corpus::{Corpus, Document};
use itrg::eval::QaExample;
use itrg::retriever::{EmbedError, Embedder, EmbeddingVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if v.iter().any(|x| *x != 0.0) {
            return v;
        }
    }
}

/// Brute-force top-k over raw vectors: score every document, sort by
/// descending score then ascending id.
pub fn oracle_top_k(ids: &[String], docs: &[Vec<f64>], query: &[f64], k: usize) -> Vec<String> {
    let qn = query.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut scored: Vec<(f64, &String)> = ids
        .iter()
        .zip(docs)
        .map(|(id, d)| {
            let dot: f64 = d.iter().zip(query).map(|(a, b)| a * b).sum();
            let dn = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            (dot / (dn * qn), id)
        })
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(b.1)));
    scored.into_iter().take(k).map(|(_, id)| id.clone()).collect()
}

/// Embedder that returns preset vectors for known texts.
pub struct TableEmbedder {
    pub label: String,
    pub dim: usize,
    pub table: HashMap<String, Vec<f64>>,
}

impl Embedder for TableEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn identity_label(&self) -> &str {
        &self.label
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let v = self
            .table
            .get(text)
            .ok_or_else(|| EmbedError::Remote(format!("no vector for {text:?}")))?;
        Ok(EmbeddingVector::new(v.clone())?)
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// A capitalized three-syllable pseudo-word, unique per `n` below 343000.
/// All such words have the same length, so one never contains another.
pub fn pseudo_word(n: usize) -> String {
    let mut x = (n * 7919 + 104_729) % 343_000;
    let mut w = String::new();
    for _ in 0..3 {
        let s = x % 70;
        x /= 70;
        w.push(CONSONANTS[s / 5] as char);
        w.push(VOWELS[s % 5] as char);
    }
    let mut c = w.chars();
    let first = c.next().unwrap().to_ascii_uppercase();
    std::iter::once(first).chain(c).collect()
}

/// One question of the bridge scenario.
pub struct BridgeQuestion {
    pub example: QaExample,
    pub bridge_id: String,
    pub gold_id: String,
    pub bridge_text: String,
    pub gold_text: String,
}

/// Two-hop synthetic corpus.
///
/// For each question "Which river runs through the birthplace of <E>?":
/// a bridge paragraph "<E> <v> <C>." shares only the entity with the
/// question; a gold paragraph "<C> <g1> <g2> <T>." shares nothing with the
/// question but names the bridge city; four distractors each share one
/// question word and carry six filler words. The gold paragraph scores zero
/// against the question alone and is reached only once the bridge sentence
/// is appended to the query.
///
/// Words are chosen so that no two land in the same `embedder` bucket,
/// which keeps every score equal to its exact token-overlap value.
pub fn bridge_corpus(n_questions: usize, embedder: &dyn Embedder) -> (Corpus, Vec<BridgeQuestion>) {
    let shared = ["river", "birthplace", "runs", "through"];
    let bucket = |w: &str| -> usize {
        let v = embedder.embed(w).unwrap();
        v.values().iter().position(|x| *x > 0.0).unwrap()
    };
    let mut used: HashSet<usize> = ["which", "the", "of"]
        .iter()
        .chain(&shared)
        .map(|w| bucket(w))
        .collect();
    assert_eq!(used.len(), 7, "question words collide");
    let mut next = 0usize;
    let mut word = || loop {
        next += 1;
        let w = pseudo_word(next);
        if used.insert(bucket(&w.to_lowercase())) {
            return w;
        }
    };
    let mut docs = Vec::new();
    let mut questions = Vec::new();
    for i in 0..n_questions {
        let entity = word();
        let city = word();
        let target = word();
        let bridge_text = format!("{entity} {} {city}.", word().to_lowercase());
        let gold_text = format!(
            "{city} {} {} {target}.",
            word().to_lowercase(),
            word().to_lowercase()
        );
        let bridge_id = format!("q{i:02}-bridge");
        let gold_id = format!("q{i:02}-gold");
        docs.push(Document::new(&bridge_id, "", &bridge_text));
        docs.push(Document::new(&gold_id, "", &gold_text));
        for (j, s) in shared.iter().enumerate() {
            let fillers: Vec<String> = (0..6).map(|_| word().to_lowercase()).collect();
            docs.push(Document::new(
                format!("q{i:02}-distractor{j}"),
                "",
                format!("{} {s}.", fillers.join(" ")),
            ));
        }
        questions.push(BridgeQuestion {
            example: QaExample::new(
                format!("bridge-{i:02}"),
                format!("Which river runs through the birthplace of {entity}?"),
                [target],
            ),
            bridge_id,
            gold_id,
            bridge_text,
            gold_text,
        });
    }
    (Corpus::from_documents(docs, "synthetic-bridge").unwrap(), questions)
}

/// Small corpus of ordinary sentences for end-to-end runs.
pub fn tiny_corpus() -> Vec<Document> {
    [
        ("d1", "Paris", "Paris is the capital of France. The Eiffel Tower stands in Paris."),
        ("d2", "Berlin", "Berlin is the capital of Germany. The Brandenburg Gate is in Berlin."),
        ("d3", "Rome", "Rome is the capital of Italy. The Colosseum is in Rome."),
        ("d4", "Madrid", "Madrid is the capital of Spain. The Prado museum is in Madrid."),
        ("d5", "Lisbon", "Lisbon is the capital of Portugal. The Belem Tower is in Lisbon."),
        ("d6", "Vienna", "Vienna is the capital of Austria. The Hofburg palace is in Vienna."),
        ("d7", "Danube", "The Danube flows through Vienna and Budapest."),
        ("d8", "Seine", "The Seine flows through Paris."),
    ]
    .into_iter()
    .map(|(id, t, x)| Document::new(id, t, x))
    .collect()
}

pub fn tiny_dataset() -> Vec<QaExample> {
    [
        ("e1", "What is the capital of France?", "Paris"),
        ("e2", "What is the capital of Germany?", "Berlin"),
        ("e3", "What is the capital of Italy?", "Rome"),
        ("e4", "What is the capital of Spain?", "Madrid"),
        ("e5", "What is the capital of Portugal?", "Lisbon"),
        ("e6", "What is the capital of Austria?", "Vienna"),
        ("e7", "Which river flows through Paris?", "Seine"),
        ("e8", "Which river flows through Budapest?", "Danube"),
    ]
    .into_iter()
    .map(|(id, q, a)| QaExample::new(id, q, [a]))
    .collect()
}

pub fn write_jsonl<T: serde::Serialize>(path: &std::path::Path, rows: &[T]) {
    let body: String = rows
        .iter()
        .map(|r| serde_json::to_string(r).unwrap() + "\n")
        .collect();
    std::fs::write(path, body).unwrap();
}

#[derive(Debug, Clone)]
pub struct Received {
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Received {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

type Handler = dyn Fn(usize, &str) -> (u16, String) + Send + Sync;

/// Minimal HTTP/1.1 server answering every POST with `handler(n, body)`,
/// where `n` counts requests from zero.
pub struct TestServer {
    pub url: String,
    received: Arc<Mutex<Vec<Received>>>,
}

impl TestServer {
    pub fn start(handler: impl Fn(usize, &str) -> (u16, String) + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let received = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&received);
        let handler: Arc<Handler> = Arc::new(handler);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let log = Arc::clone(&log);
                let handler = Arc::clone(&handler);
                thread::spawn(move || serve(stream, &log, handler.as_ref()));
            }
        });
        Self { url, received }
    }

    pub fn received(&self) -> Vec<Received> {
        self.received.lock().unwrap().clone()
    }
}

fn serve(stream: TcpStream, log: &Mutex<Vec<Received>>, handler: &Handler) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
        return;
    }
    let mut headers = Vec::new();
    let mut len = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().unwrap();
            }
            headers.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body).unwrap();
    let body = String::from_utf8(body).unwrap();
    let n = {
        let mut log = log.lock().unwrap();
        log.push(Received {
            headers,
            body: body.clone(),
        });
        log.len() - 1
    };
    let (status, reply) = handler(n, &body);
    let mut stream = stream;
    let _ = write!(
        stream,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
        reply.len()
    );
}

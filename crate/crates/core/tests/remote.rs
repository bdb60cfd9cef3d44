mod common;

use std::time::{Duration, Instant};

use common::TestServer;
use itrg::generator::{BackendError, CompletionBackend, DecodingParams, RemoteBackend};
use itrg::retriever::{EmbedError, Embedder, RemoteEmbedder};
use itrg::EndpointConfig;
use serde_json::{json, Value};

fn endpoint(url: &str) -> EndpointConfig {
    let mut cfg = EndpointConfig::new(url);
    cfg.retry_backoff = Duration::from_millis(5);
    cfg.timeout = Duration::from_secs(5);
    cfg
}

#[test]
fn completion_request_and_response_shape() {
    let server = TestServer::start(|_, _| (200, json!({"text": " Paris\n"}).to_string()));
    let mut cfg = endpoint(&server.url);
    cfg.auth_header = Some(("Authorization".into(), "Bearer secret".into()));
    let backend = RemoteBackend::new(cfg, 2).unwrap();
    let out = backend
        .complete("Question: capital?\nAnswer:", &DecodingParams::answer())
        .unwrap();
    assert_eq!(out, " Paris\n");
    assert_eq!(backend.max_in_flight(), Some(2));

    let got = server.received();
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].header("authorization"), Some("Bearer secret"));
    let body: Value = serde_json::from_str(&got[0].body).unwrap();
    assert_eq!(
        body,
        json!({"prompt": "Question: capital?\nAnswer:", "max_tokens": 15, "temperature": 0})
    );
}

#[test]
fn server_errors_are_retried() {
    let server = TestServer::start(|n, _| {
        if n < 2 {
            (503, "busy".into())
        } else {
            (200, json!({"text": "ok"}).to_string())
        }
    });
    let backend = RemoteBackend::new(endpoint(&server.url), 1).unwrap();
    assert_eq!(backend.complete("p", &DecodingParams::document()).unwrap(), "ok");
    assert_eq!(server.received().len(), 3);
}

#[test]
fn retries_are_bounded() {
    let server = TestServer::start(|_, _| (500, "down".into()));
    let mut cfg = endpoint(&server.url);
    cfg.retries = 2;
    let backend = RemoteBackend::new(cfg, 1).unwrap();
    match backend.complete("p", &DecodingParams::document()) {
        Err(BackendError::Transport { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("{other:?}"),
    }
    assert_eq!(server.received().len(), 3);
}

#[test]
fn client_errors_are_classified_without_retry() {
    let server = TestServer::start(|_, body| {
        if body.contains("too long") {
            (413, "prompt exceeds context".into())
        } else {
            (400, "content policy".into())
        }
    });
    let backend = RemoteBackend::new(endpoint(&server.url), 1).unwrap();
    assert!(matches!(
        backend.complete("too long", &DecodingParams::document()),
        Err(BackendError::TokenBudget(_))
    ));
    match backend.complete("bad", &DecodingParams::document()) {
        Err(BackendError::Refused { prompt_hash, .. }) => {
            assert_eq!(prompt_hash, itrg::generator::prompt_hash("bad"))
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(server.received().len(), 2);
}

#[test]
fn malformed_response_is_a_protocol_error() {
    let server = TestServer::start(|_, _| (200, "{\"completion\": 1}".into()));
    let backend = RemoteBackend::new(endpoint(&server.url), 1).unwrap();
    assert!(matches!(
        backend.complete("p", &DecodingParams::document()),
        Err(BackendError::Protocol(_))
    ));
}

#[test]
fn unreachable_endpoint_fails_after_retries() {
    // Bind then drop to get a port with nothing listening.
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let mut cfg = endpoint(&format!("http://127.0.0.1:{port}"));
    cfg.retries = 1;
    let backend = RemoteBackend::new(cfg, 1).unwrap();
    let start = Instant::now();
    match backend.complete("p", &DecodingParams::document()) {
        Err(BackendError::Transport { attempts, .. }) => assert_eq!(attempts, 2),
        other => panic!("{other:?}"),
    }
    assert!(start.elapsed() < Duration::from_secs(5));
}

#[test]
fn remote_embedder_round_trip() {
    let server = TestServer::start(|_, body| {
        let req: Value = serde_json::from_str(body).unwrap();
        let n = req["input"].as_array().unwrap().len();
        let vecs: Vec<Vec<f64>> = (0..n).map(|i| vec![1.0, i as f64, 0.5]).collect();
        (200, json!({ "embeddings": vecs }).to_string())
    });
    let e = RemoteEmbedder::new(endpoint(&server.url), 3, "toy-encoder").unwrap();
    assert_eq!(e.identity_label(), "toy-encoder/dim=3");
    let out = e.embed_batch(&["a", "b"]).unwrap();
    assert_eq!(out[1].values(), &[1.0, 1.0, 0.5]);
    let body: Value = serde_json::from_str(&server.received()[0].body).unwrap();
    assert_eq!(body, json!({"input": ["a", "b"]}));
}

#[test]
fn remote_embedder_validates_vectors() {
    let server = TestServer::start(|n, _| match n {
        0 => (200, json!({"embeddings": [[1.0, 2.0]]}).to_string()),
        1 => (200, json!({"embeddings": [[0.0, 0.0, 0.0]]}).to_string()),
        _ => (200, json!({"embeddings": []}).to_string()),
    });
    let e = RemoteEmbedder::new(endpoint(&server.url), 3, "toy").unwrap();
    assert!(matches!(e.embed("x"), Err(EmbedError::Invalid(_))));
    assert!(matches!(e.embed("x"), Err(EmbedError::Invalid(_))));
    assert!(matches!(
        e.embed("x"),
        Err(EmbedError::CountMismatch { expected: 1, got: 0 })
    ));
}

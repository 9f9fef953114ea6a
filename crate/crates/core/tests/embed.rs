mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdq_core::embed::{
    deterministic_test_embedder, embed_text, embed_texts, record_bytes, CacheKey, EmbeddingCache,
    EmbeddingProvider, CACHE_HEADER_BYTES,
};

#[test]
fn ten_thousand_entries_survive_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.sdqe");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut entries = Vec::with_capacity(10_000);
    {
        let cache = EmbeddingCache::open(&path, 768).unwrap();
        for i in 0..10_000 {
            let key = CacheKey::new(if i % 2 == 0 { "a" } else { "b" }, &format!("text {i}"));
            let v: Vec<f32> = (0..768).map(|_| rng.random_range(-1.0..1.0)).collect();
            cache.put(key, &v).unwrap();
            entries.push((key, v));
        }
    }
    let cache = EmbeddingCache::open(&path, 768).unwrap();
    assert_eq!(cache.load_report().loaded, 10_000);
    assert_eq!(cache.load_report().corrupt, 0);
    for (k, v) in &entries {
        assert_eq!(cache.get(k).as_ref(), Some(v));
    }
    let size = std::fs::metadata(&path).unwrap().len() as f64;
    let nominal = 10_000.0 * (44.0 + 768.0 * 4.0);
    assert!((size - nominal).abs() / nominal < 0.10);
    assert_eq!(
        size as usize,
        CACHE_HEADER_BYTES + 10_000 * record_bytes(768)
    );
}

#[test]
fn concurrent_readers_and_writers() {
    let cache = EmbeddingCache::in_memory(8);
    std::thread::scope(|s| {
        for t in 0..4 {
            let cache = &cache;
            s.spawn(move || {
                for i in 0..200 {
                    let k = CacheKey::new("p", &format!("{t}-{i}"));
                    cache.put(k, &[t as f32; 8]).unwrap();
                    assert_eq!(cache.get(&k).unwrap(), [t as f32; 8]);
                }
            });
        }
    });
    assert_eq!(cache.len(), 800);
}

#[cfg(feature = "net")]
mod remote {
    use super::*;
    use common::StubServer;
    use sdq_core::embed::remote::{RemoteConfig, RemoteProvider};
    use sdq_core::embed::EmbedError;
    use serde_json::{json, Value};
    use std::time::Duration;

    /// Serves the embedding protocol backed by the stub embedder.
    fn server(loading_for: usize) -> StubServer {
        let backend = deterministic_test_embedder(9);
        StubServer::start(Box::new(move |req, i| {
            if i < loading_for {
                return (503, r#"{"error":"loading"}"#.into());
            }
            match (req.method.as_str(), req.path.as_str()) {
                ("GET", "/info") => (
                    200,
                    json!({"model_id": "stub-model", "dimension": 768, "max_tokens": 512, "revision": "r1"})
                        .to_string(),
                ),
                ("POST", "/embed") => {
                    let texts = req.json()["texts"].as_array().unwrap().clone();
                    if texts.len() > 64 {
                        return (413, "{}".into());
                    }
                    let embs: Vec<Value> = texts
                        .iter()
                        .map(|t| json!(embed_text(t.as_str().unwrap(), &backend).unwrap()))
                        .collect();
                    let chunked = vec![false; texts.len()];
                    (
                        200,
                        json!({"embeddings": embs, "model_id": "stub-model", "chunked": chunked})
                            .to_string(),
                    )
                }
                _ => (404, "{}".into()),
            }
        }))
    }

    fn connect(url: &str) -> RemoteProvider {
        let mut cfg = RemoteConfig::new(url);
        cfg.retry_backoff = Duration::from_millis(1);
        RemoteProvider::connect(cfg).unwrap()
    }

    #[test]
    fn provider_contract_over_http() {
        let s = server(0);
        let p = connect(&s.url);
        assert_eq!(p.dimension(), 768);
        assert_eq!(p.token_budget(), 512);
        assert_eq!(p.id(), "remote:stub-model@r1");
        let local = deterministic_test_embedder(9);
        let a = p.embed_chunk("hello world").unwrap();
        assert_eq!(a, local.embed_chunk("hello world").unwrap());
        assert_eq!(a, p.embed_chunk("hello world").unwrap());
        assert_eq!(
            embed_text("A cat. A dog.", &p).unwrap(),
            embed_text("A cat. A dog.", &local).unwrap()
        );
    }

    #[test]
    fn batches_are_capped_at_64_texts() {
        let s = server(0);
        let p = connect(&s.url);
        let texts: Vec<String> = (0..150).map(|i| format!("Text number {i}.")).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let out = embed_texts(&refs, &p).unwrap();
        assert_eq!(out.len(), 150);
        let sizes: Vec<usize> = s
            .recorded()
            .iter()
            .filter(|r| r.path == "/embed")
            .map(|r| r.json()["texts"].as_array().unwrap().len())
            .collect();
        assert_eq!(sizes, [64, 64, 22]);
    }

    #[test]
    fn waits_out_model_loading() {
        let s = server(2);
        let p = connect(&s.url);
        assert_eq!(p.info().dimension, 768);
    }

    #[test]
    fn wrong_dimension_is_a_protocol_error() {
        let s = StubServer::start(Box::new(|req, _| match req.path.as_str() {
            "/info" => (
                200,
                r#"{"model_id":"m","dimension":768,"max_tokens":512}"#.into(),
            ),
            _ => (
                200,
                r#"{"embeddings":[[1.0,2.0]],"model_id":"m","chunked":[false]}"#.into(),
            ),
        }));
        let p = connect(&s.url);
        assert!(matches!(
            p.embed_chunk("x"),
            Err(EmbedError::Dimension {
                expected: 768,
                got: 2
            })
        ));
    }

    #[test]
    fn unreachable_endpoint_names_it() {
        let mut cfg = RemoteConfig::new("http://127.0.0.1:9");
        cfg.timeout = Duration::from_secs(2);
        let err = RemoteProvider::connect(cfg).unwrap_err().to_string();
        assert!(err.contains("127.0.0.1:9"), "{err}");
    }
}

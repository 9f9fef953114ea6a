//! Text embedding: sentence segmentation, chunk packing, provider calls,
//! mean pooling and a persistent cache.

mod cache;
#[cfg(feature = "net")]
pub mod remote;
mod segment;
mod stub;

pub use cache::{
    record_bytes, CacheKey, CacheLoadReport, CachedProvider, EmbeddingCache, CACHE_HEADER_BYTES,
    CACHE_MAGIC, CACHE_VERSION,
};
pub use segment::{
    normalize_whitespace, pack_chunks, proxy_token_count, segment_sentences, Chunk, ChunkPlan,
    ABBREVIATIONS,
};
pub use stub::{deterministic_test_embedder, StubEmbedder, STUB_DIMENSION, STUB_TOKEN_BUDGET};

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("vector has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("vector contains a non-finite value")]
    NonFinite,
    #[error("chunk {index}: {source}")]
    Chunk {
        index: usize,
        #[source]
        source: Box<EmbedError>,
    },
    #[error("provider {provider} is unavailable: {reason}")]
    Unavailable { provider: String, reason: String },
    #[error("embedding request failed: {0}")]
    Http(String),
    #[error("embedding protocol violation: {0}")]
    Protocol(String),
    #[error("embedding cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A source of fixed-size text embeddings. Identical text must yield an
/// identical vector for one provider configuration.
pub trait EmbeddingProvider: Send + Sync {
    /// Stable identity; cache entries are keyed by it.
    fn id(&self) -> &str;
    fn dimension(&self) -> usize;
    /// Token budget per chunk.
    fn token_budget(&self) -> usize;
    fn embed_chunk(&self, text: &str) -> Result<Vec<f32>, EmbedError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        texts.iter().map(|t| self.embed_chunk(t)).collect()
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for &P {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn token_budget(&self) -> usize {
        (**self).token_budget()
    }
    fn embed_chunk(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        (**self).embed_chunk(text)
    }
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        (**self).embed_batch(texts)
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn token_budget(&self) -> usize {
        (**self).token_budget()
    }
    fn embed_chunk(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        (**self).embed_chunk(text)
    }
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        (**self).embed_batch(texts)
    }
}

/// Provider that never computes anything, for cache-only offline runs.
#[derive(Debug, Clone)]
pub struct OfflineProvider {
    pub id: String,
    pub dimension: usize,
    pub token_budget: usize,
    pub reason: String,
}

impl EmbeddingProvider for OfflineProvider {
    fn id(&self) -> &str {
        &self.id
    }
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn token_budget(&self) -> usize {
        self.token_budget
    }
    fn embed_chunk(&self, _text: &str) -> Result<Vec<f32>, EmbedError> {
        Err(EmbedError::Unavailable {
            provider: self.id.clone(),
            reason: self.reason.clone(),
        })
    }
}

pub fn check_vector(v: &[f32], dimension: usize) -> Result<(), EmbedError> {
    if v.len() != dimension {
        return Err(EmbedError::Dimension {
            expected: dimension,
            got: v.len(),
        });
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(EmbedError::NonFinite);
    }
    Ok(())
}

/// Chunks of `text` under the provider's budget, after whitespace
/// normalization.
pub fn plan_text<P: EmbeddingProvider + ?Sized>(text: &str, provider: &P) -> ChunkPlan {
    let sentences = segment_sentences(text);
    pack_chunks(&sentences, provider.token_budget(), proxy_token_count)
}

/// Segments, packs, embeds every chunk and averages the chunk vectors.
pub fn embed_text<P: EmbeddingProvider + ?Sized>(
    text: &str,
    provider: &P,
) -> Result<Vec<f32>, EmbedError> {
    let plan = plan_text(text, provider);
    if plan.is_empty() {
        return Err(EmbedError::EmptyText);
    }
    let mut vectors = Vec::with_capacity(plan.len());
    for (index, chunk) in plan.chunks.iter().enumerate() {
        let v = provider
            .embed_chunk(&chunk.text)
            .and_then(|v| check_vector(&v, provider.dimension()).map(|_| v))
            .map_err(|e| EmbedError::Chunk {
                index,
                source: Box::new(e),
            })?;
        vectors.push(v);
    }
    Ok(mean_vectors(&vectors))
}

/// Embeds many texts, batching all of their chunks through
/// `embed_batch`. Errors name the first failing text's chunk range start.
pub fn embed_texts<P: EmbeddingProvider + ?Sized>(
    texts: &[&str],
    provider: &P,
) -> Result<Vec<Vec<f32>>, EmbedError> {
    let plans: Vec<ChunkPlan> = texts.iter().map(|t| plan_text(t, provider)).collect();
    if plans.iter().any(|p| p.is_empty()) {
        return Err(EmbedError::EmptyText);
    }
    let all: Vec<&str> = plans.iter().flat_map(|p| p.texts()).collect();
    let vecs = provider.embed_batch(&all)?;
    if vecs.len() != all.len() {
        return Err(EmbedError::Protocol(format!(
            "provider returned {} vectors for {} chunks",
            vecs.len(),
            all.len()
        )));
    }
    let mut out = Vec::with_capacity(texts.len());
    let mut at = 0;
    for plan in &plans {
        let group = &vecs[at..at + plan.len()];
        for (i, v) in group.iter().enumerate() {
            check_vector(v, provider.dimension()).map_err(|e| EmbedError::Chunk {
                index: at + i,
                source: Box::new(e),
            })?;
        }
        out.push(mean_vectors(group));
        at += plan.len();
    }
    Ok(out)
}

/// Component-wise mean, accumulated in f64. A single vector is returned
/// unchanged.
pub fn mean_vectors(vectors: &[Vec<f32>]) -> Vec<f32> {
    if vectors.len() == 1 {
        return vectors[0].clone();
    }
    let dim = vectors.first().map_or(0, Vec::len);
    let mut acc = vec![0.0f64; dim];
    for v in vectors {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += *x as f64;
        }
    }
    let n = vectors.len() as f64;
    acc.into_iter().map(|a| (a / n) as f32).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Returns a fixed vector per chunk index in the text's first word.
    struct Fixed;

    impl EmbeddingProvider for Fixed {
        fn id(&self) -> &str {
            "fixed"
        }
        fn dimension(&self) -> usize {
            3
        }
        fn token_budget(&self) -> usize {
            3
        }
        fn embed_chunk(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
            match text.split_whitespace().next() {
                Some("One") => Ok(vec![1.0, 0.0, 0.0]),
                Some("Two") => Ok(vec![0.0, 1.0, 0.0]),
                Some("Bad") => Err(EmbedError::Http("boom".into())),
                _ => Ok(vec![0.0, 0.0, 4.0]),
            }
        }
    }

    #[test]
    fn single_chunk_is_identity() {
        let e = deterministic_test_embedder(5);
        let t = "A short text. It fits.";
        assert_eq!(embed_text(t, &e).unwrap(), e.embed_chunk(t).unwrap());
    }

    #[test]
    fn mean_of_two_chunks() {
        let v = embed_text("One ab. Two cd.", &Fixed).unwrap();
        assert_eq!(v, [0.5, 0.5, 0.0]);
    }

    #[test]
    fn errors_carry_chunk_index() {
        let err = embed_text("One ab. Bad cd.", &Fixed).unwrap_err();
        assert!(matches!(err, EmbedError::Chunk { index: 1, .. }), "{err}");
        assert!(matches!(
            embed_text(" \n", &Fixed),
            Err(EmbedError::EmptyText)
        ));
    }

    #[test]
    fn five_chunk_mean_matches_oracle() {
        let e = deterministic_test_embedder(11);
        let sentences: Vec<String> = (0..5)
            .map(|i| {
                let words: Vec<String> = (0..299)
                    .map(|j| format!("w{}", (i * 7919 + j * 31) % 5000))
                    .collect();
                format!("Start {}.", words.join(" "))
            })
            .collect();
        let text = sentences.join(" ");
        let plan = plan_text(&text, &e);
        assert_eq!(plan.len(), 5);
        let got = embed_text(&text, &e).unwrap();
        for d in 0..768 {
            let oracle: f64 = sentences
                .iter()
                .map(|s| e.embed_chunk(s).unwrap()[d] as f64)
                .sum::<f64>()
                / 5.0;
            assert!((got[d] as f64 - oracle).abs() < 1e-7);
        }
        let batched = embed_texts(&[text.as_str(), "One more."], &e).unwrap();
        assert_eq!(batched[0], got);
    }

    #[test]
    fn offline_provider_names_itself() {
        let p = OfflineProvider {
            id: "remote:x".into(),
            dimension: 3,
            token_budget: 10,
            reason: "network disabled".into(),
        };
        let err = embed_text("Hello.", &p).unwrap_err().to_string();
        assert!(err.contains("remote:x"), "{err}");
    }

    proptest! {
        #[test]
        fn whitespace_style_does_not_matter(words in proptest::collection::vec("[a-z]{1,8}", 1..60)) {
            let e = StubEmbedder::with_dimension(2, 16);
            let plain = words.join(" ");
            let messy = format!("{}  \r\n\t", words.join("\r\n"));
            prop_assert_eq!(embed_text(&plain, &e).unwrap(), embed_text(&messy, &e).unwrap());
        }

        #[test]
        fn pooled_norm_bounded_by_chunk_norms(n in 1usize..8, seed in 0u64..1000) {
            let e = deterministic_test_embedder(seed);
            let sentences: Vec<String> = (0..n)
                .map(|i| format!("Go {}.", (0..200).map(|j| format!("t{}", (i * 13 + j) % 97)).collect::<Vec<_>>().join(" ")))
                .collect();
            let text = sentences.join(" ");
            let pooled = embed_text(&text, &e).unwrap();
            let norm = |v: &[f32]| v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
            let max_chunk = plan_text(&text, &e)
                .chunks
                .iter()
                .map(|c| norm(&e.embed_chunk(&c.text).unwrap()))
                .fold(0.0, f64::max);
            prop_assert!(norm(&pooled) <= max_chunk + 1e-6);
        }
    }
}

//! Deterministic offline embedder keyed by `(seed, token)`.

use super::{EmbedError, EmbeddingProvider};
use crate::util::{fnv1a64, splitmix64};

pub const STUB_DIMENSION: usize = 768;
pub const STUB_TOKEN_BUDGET: usize = 512;

/// Each token maps to a pseudo-random vector with entries uniform in
/// [-1, 1), produced by a counter-based generator so every platform agrees.
/// A text embeds to the L2-normalized mean of its token vectors.
#[derive(Debug, Clone)]
pub struct StubEmbedder {
    seed: u64,
    dimension: usize,
    id: String,
}

impl StubEmbedder {
    pub fn new(seed: u64) -> Self {
        Self::with_dimension(seed, STUB_DIMENSION)
    }

    pub fn with_dimension(seed: u64, dimension: usize) -> Self {
        Self {
            seed,
            dimension,
            id: format!("stub-{seed}-{dimension}"),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Lowercased alphanumeric runs.
    pub fn tokens(text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .collect()
    }

    pub fn token_vector(&self, token: &str, out: &mut [f64]) {
        let key = splitmix64(self.seed ^ fnv1a64(token.as_bytes()));
        for (i, v) in out.iter_mut().enumerate() {
            let r = splitmix64(key.wrapping_add((i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)));
            // top 53 bits -> [0, 1) -> [-1, 1)
            *v = (r >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * 2.0 - 1.0;
        }
    }
}

/// The deterministic test embedder: dimension 768, budget 512 tokens.
pub fn deterministic_test_embedder(seed: u64) -> StubEmbedder {
    StubEmbedder::new(seed)
}

impl EmbeddingProvider for StubEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn token_budget(&self) -> usize {
        STUB_TOKEN_BUDGET
    }

    fn embed_chunk(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        let mut tokens = Self::tokens(text);
        if tokens.is_empty() {
            let t = text.trim();
            if t.is_empty() {
                return Err(EmbedError::EmptyText);
            }
            tokens.push(t.to_string());
        }
        let mut acc = vec![0.0f64; self.dimension];
        let mut tv = vec![0.0f64; self.dimension];
        for t in &tokens {
            self.token_vector(t, &mut tv);
            for (a, v) in acc.iter_mut().zip(&tv) {
                *a += v;
            }
        }
        let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = if norm > 0.0 { 1.0 / norm } else { 0.0 };
        Ok(acc.iter().map(|v| (v * scale) as f32).collect())
    }
}

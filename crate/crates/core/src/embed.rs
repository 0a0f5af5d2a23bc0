//! Embedding vectors and pluggable embedding providers.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::text;

/// A finite, unit-normalized dense vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Normalizes `values` to unit length. Fails on empty, non-finite or zero input.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("embedding has zero dimension".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("embedding has non-finite entries".into()));
        }
        let norm = l2_norm(&values);
        if norm == 0.0 {
            return Err(Error::Invalid("embedding has zero norm".into()));
        }
        Ok(Self(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        dot(&self.0, &other.0)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; zero vectors have similarity 0 with everything.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let denom = l2_norm(a) * l2_norm(b);
    if denom == 0.0 {
        0.0
    } else {
        dot(a, b) / denom
    }
}

/// A text encoder. Implementations must be pure functions of their input.
pub trait Embedder: Send + Sync {
    /// Identifies the provider and its parameters; stored in persisted indexes.
    fn fingerprint(&self) -> String;

    fn dim(&self) -> usize;

    /// Raw (not necessarily normalized) vector for `text`.
    fn embed_raw(&self, text: &str) -> Result<Vec<f64>>;
}

/// Embeds `text` and normalizes the result, enforcing the provider's dimension.
pub fn embed(text: &str, provider: &dyn Embedder) -> Result<EmbeddingVector> {
    if text.trim().is_empty() {
        return Err(Error::Invalid("cannot embed empty text".into()));
    }
    let raw = provider.embed_raw(text)?;
    if raw.len() != provider.dim() {
        return Err(Error::Config(format!(
            "provider `{}` returned dimension {} (expected {})",
            provider.fingerprint(),
            raw.len(),
            provider.dim()
        )));
    }
    EmbeddingVector::normalized(raw)
}

fn seeded_rng(seed: u64, domain: &str, text: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(domain.as_bytes());
    hasher.update([0u8]);
    hasher.update(text.as_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

fn gaussian_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Mock provider: each distinct text maps to a hash-seeded pseudo-random direction.
///
/// The SHA-256 of `seed ‖ "text" ‖ 0x00 ‖ text` seeds a ChaCha8 stream from
/// which `dim` standard normal samples are drawn.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim, seed }
    }
}

impl Embedder for HashEmbedder {
    fn fingerprint(&self) -> String {
        format!("hash-v1/d{}/s{}", self.dim, self.seed)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>> {
        Ok(gaussian_vector(&mut seeded_rng(self.seed, "text", text), self.dim))
    }
}

/// Bag-of-words mock provider: the sum of hash-seeded directions of each token.
///
/// Texts sharing vocabulary land close together, which makes retrieval and
/// clustering behave sensibly on small fixtures without a model.
#[derive(Debug, Clone)]
pub struct TokenHashEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl TokenHashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim, seed }
    }
}

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "of", "and", "or", "is", "are", "was", "were", "to", "in", "on", "for",
    "by", "with", "what", "which", "who", "whom", "when", "where", "how", "does", "do", "did",
    "it", "its", "as", "at", "be", "that", "this", "from",
];

impl Embedder for TokenHashEmbedder {
    fn fingerprint(&self) -> String {
        format!("token-hash-v1/d{}/s{}", self.dim, self.seed)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>> {
        let toks: Vec<String> = text::tokens(text)
            .into_iter()
            .filter(|t| !STOPWORDS.contains(&t.as_str()))
            .collect();
        if toks.is_empty() {
            return Ok(gaussian_vector(&mut seeded_rng(self.seed, "text", text), self.dim));
        }
        let mut acc = vec![0.0; self.dim];
        for tok in &toks {
            let v = gaussian_vector(&mut seeded_rng(self.seed, "token", tok), self.dim);
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x;
            }
        }
        Ok(acc)
    }
}

/// Test provider with fixed vectors per text, falling back to [`HashEmbedder`].
#[derive(Debug, Clone)]
pub struct ScriptedEmbedder {
    vectors: HashMap<String, Vec<f64>>,
    fallback: HashEmbedder,
}

impl ScriptedEmbedder {
    pub fn new(dim: usize) -> Self {
        Self {
            vectors: HashMap::new(),
            fallback: HashEmbedder::new(dim, 0),
        }
    }

    pub fn with(mut self, text: impl Into<String>, vector: Vec<f64>) -> Self {
        self.vectors.insert(text.into(), vector);
        self
    }

    pub fn insert(&mut self, text: impl Into<String>, vector: Vec<f64>) {
        self.vectors.insert(text.into(), vector);
    }
}

impl Embedder for ScriptedEmbedder {
    fn fingerprint(&self) -> String {
        format!("scripted/d{}", self.fallback.dim)
    }

    fn dim(&self) -> usize {
        self.fallback.dim
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>> {
        match self.vectors.get(text) {
            Some(v) => Ok(v.clone()),
            None => self.fallback.embed_raw(text),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_unit_norm() {
        let e = HashEmbedder::new(32, 3);
        let a = embed("What is HP", &e).unwrap();
        let b = embed("What is HP", &HashEmbedder::new(32, 3)).unwrap();
        assert_eq!(a, b);
        assert!((l2_norm(a.as_slice()) - 1.0).abs() < 1e-6);
        assert_ne!(a, embed("What is HP?", &e).unwrap());
        assert_ne!(a, embed("What is HP", &HashEmbedder::new(32, 4)).unwrap());
    }

    #[test]
    fn hash_embedder_matches_independent_recomputation() {
        // Recompute the mock's documented construction from its primitives.
        let mut hasher = Sha256::new();
        hasher.update(9u64.to_le_bytes());
        hasher.update(b"text\0horsepower");
        let seed: [u8; 32] = hasher.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(seed);
        let raw: Vec<f64> = (0..8).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();

        let v = embed("horsepower", &HashEmbedder::new(8, 9)).unwrap();
        for (got, want) in v.as_slice().iter().zip(&raw) {
            assert!((got - want / norm).abs() < 1e-12);
        }
    }

    #[test]
    fn token_embedder_relates_shared_vocabulary() {
        let e = TokenHashEmbedder::new(256, 0);
        let q = embed("HP company Hewlett-Packard", &e).unwrap();
        let near = embed("Hewlett-Packard is a technology company", &e).unwrap();
        let far = embed("A wizard boy attends a school of magic", &e).unwrap();
        assert!(q.dot(&near) > q.dot(&far) + 0.2);
    }

    #[test]
    fn rejects_empty_text_and_bad_dimension() {
        struct Broken;
        impl Embedder for Broken {
            fn fingerprint(&self) -> String {
                "broken".into()
            }
            fn dim(&self) -> usize {
                4
            }
            fn embed_raw(&self, _: &str) -> Result<Vec<f64>> {
                Ok(vec![1.0; 3])
            }
        }
        assert!(matches!(embed("  ", &HashEmbedder::new(4, 0)), Err(Error::Invalid(_))));
        assert!(matches!(embed("x", &Broken), Err(Error::Config(_))));
    }

    #[test]
    fn cosine_is_symmetric() {
        let a = [0.3, -1.2, 2.0];
        let b = [1.5, 0.1, -0.7];
        assert!((cosine(&a, &b) - cosine(&b, &a)).abs() < 1e-9);
        assert_eq!(cosine(&[0.0, 0.0], &a[..2]), 0.0);
    }
}

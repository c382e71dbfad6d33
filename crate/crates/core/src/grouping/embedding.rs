//! Embedding vectors and providers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::ProviderError;
use crate::text::{collapse_whitespace, normalize_name};

pub const DEFAULT_EMBEDDING_DIMENSION: usize = 512;

/// Unit-length embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Normalizes `values` to unit length. A zero (or non-finite) vector
    /// becomes the first canonical basis vector.
    pub fn from_values(mut values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "embedding dimension must be positive");
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            values.iter_mut().for_each(|v| *v /= norm);
        } else {
            values.iter_mut().for_each(|v| *v = 0.0);
            values[0] = 1.0;
        }
        Self(values)
    }

    pub fn canonical(dimension: usize) -> Self {
        Self::from_values(vec![0.0; dimension])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    /// Cosine similarity; vectors of different dimension are unrelated.
    pub fn cosine(&self, other: &Self) -> f64 {
        if self.0.len() != other.0.len() {
            return 0.0;
        }
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Re-normalized arithmetic mean.
    pub fn mean<'a>(vectors: impl IntoIterator<Item = &'a EmbeddingVector>) -> Option<Self> {
        let mut iter = vectors.into_iter();
        let first = iter.next()?;
        let mut sum = first.0.clone();
        let mut count = 1.0;
        for v in iter {
            if v.dimension() != sum.len() {
                continue;
            }
            sum.iter_mut().zip(&v.0).for_each(|(s, x)| *s += x);
            count += 1.0;
        }
        sum.iter_mut().for_each(|s| *s /= count);
        Some(Self::from_values(sum))
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        let mut out = self.embed_batch(&[text.to_string()])?;
        out.pop().ok_or_else(|| ProviderError::Malformed("empty response".into()))
    }
}

/// Deterministic offline embedder: hashed character-trigram term
/// frequencies, unit-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrigramEmbedder {
    dimension: usize,
}

impl Default for TrigramEmbedder {
    fn default() -> Self {
        Self { dimension: DEFAULT_EMBEDDING_DIMENSION }
    }
}

impl TrigramEmbedder {
    pub fn with_dimension(dimension: usize) -> Self {
        assert!(dimension > 0);
        Self { dimension }
    }

    pub fn embed_text(&self, text: &str) -> EmbeddingVector {
        let cleaned = collapse_whitespace(&text.to_lowercase());
        let mut counts = vec![0.0; self.dimension];
        if !cleaned.is_empty() {
            let padded: Vec<char> = format!(" {cleaned} ").chars().collect();
            for window in padded.windows(3) {
                let trigram: String = window.iter().collect();
                let slot = (fnv1a(trigram.as_bytes()) % self.dimension as u64) as usize;
                counts[slot] += 1.0;
            }
        }
        EmbeddingVector::from_values(counts)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

impl EmbeddingProvider for TrigramEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }
}

/// Fixed vectors for known texts (matched by normalized form); unknown
/// texts go to the trigram embedder. Fixture vectors are zero-padded or
/// truncated to the fallback dimension.
#[derive(Debug, Clone, Default)]
pub struct FixtureEmbedder {
    fixtures: BTreeMap<String, EmbeddingVector>,
    fallback: TrigramEmbedder,
}

impl FixtureEmbedder {
    pub fn new<K: AsRef<str>>(entries: impl IntoIterator<Item = (K, Vec<f64>)>) -> Self {
        let fallback = TrigramEmbedder::default();
        let fixtures = entries
            .into_iter()
            .map(|(k, mut v)| {
                v.resize(fallback.dimension, 0.0);
                (normalize_name(k.as_ref()), EmbeddingVector::from_values(v))
            })
            .collect();
        Self { fixtures, fallback }
    }

    pub fn from_json(json: &str) -> Result<Self, ProviderError> {
        let raw: BTreeMap<String, Vec<f64>> =
            serde_json::from_str(json).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        if raw.values().any(|v| v.is_empty()) {
            return Err(ProviderError::Malformed("empty fixture vector".into()));
        }
        Ok(Self::new(raw))
    }
}

impl EmbeddingProvider for FixtureEmbedder {
    fn dimension(&self) -> usize {
        self.fallback.dimension
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        Ok(texts
            .iter()
            .map(|t| {
                self.fixtures
                    .get(&normalize_name(t))
                    .cloned()
                    .unwrap_or_else(|| self.fallback.embed_text(t))
            })
            .collect())
    }
}

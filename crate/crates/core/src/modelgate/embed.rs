//! Local embedder and the fixed-dimension guard.

use std::sync::OnceLock;

use async_trait::async_trait;

use super::{Embedder, GateError};
use crate::text::normalize;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

/// Signed feature hashing of word unigrams and bigrams into a fixed number of buckets.
///
/// Deterministic and offline. Texts sharing vocabulary score high, disjoint texts near zero.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    embedder_id: String,
    dimension: usize,
}

impl HashingEmbedder {
    pub fn new(embedder_id: &str, dimension: usize) -> Self {
        Self {
            embedder_id: embedder_id.to_string(),
            dimension: dimension.max(1),
        }
    }

    /// Recognizes ids of the form `hashing-<dimension>`.
    pub fn from_id(embedder_id: &str) -> Option<Self> {
        let dim: usize = embedder_id.strip_prefix("hashing-")?.parse().ok()?;
        (dim > 0).then(|| Self::new(embedder_id, dim))
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn vector(&self, text: &str) -> Vec<f64> {
        let norm = normalize(text);
        let words: Vec<&str> = norm
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .collect();
        let mut features: Vec<String> = words.iter().map(|w| w.to_string()).collect();
        features.extend(words.windows(2).map(|p| format!("{} {}", p[0], p[1])));
        if features.is_empty() {
            features.push(norm);
        }
        let mut v = vec![0.0; self.dimension];
        for f in &features {
            let h = fnv1a(f.as_bytes());
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[(h % self.dimension as u64) as usize] += sign;
        }
        v
    }
}

#[async_trait]
impl Embedder for HashingEmbedder {
    fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    async fn embed(&self, text: &str) -> Result<Vec<f64>, GateError> {
        if text.is_empty() {
            return Err(GateError::EmptyText);
        }
        Ok(self.vector(text))
    }
}

/// Rejects empty input and any vector whose length differs from the first one returned.
pub struct CheckedEmbedder<E> {
    inner: E,
    dimension: OnceLock<usize>,
}

impl<E: Embedder> CheckedEmbedder<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            dimension: OnceLock::new(),
        }
    }
}

#[async_trait]
impl<E: Embedder> Embedder for CheckedEmbedder<E> {
    fn embedder_id(&self) -> &str {
        self.inner.embedder_id()
    }

    async fn embed(&self, text: &str) -> Result<Vec<f64>, GateError> {
        if text.is_empty() {
            return Err(GateError::EmptyText);
        }
        let v = self.inner.embed(text).await?;
        let expected = *self.dimension.get_or_init(|| v.len());
        if v.len() != expected {
            return Err(GateError::DimensionMismatch {
                embedder_id: self.inner.embedder_id().to_string(),
                expected,
                got: v.len(),
            });
        }
        Ok(v)
    }
}

//! Fixed-dimension vector representations of prompt segments. The built-in
//! hashing embedder keeps training and evaluation model-free; a remote
//! encoder can be plugged in through [`EmbeddingProvider`].

use crate::code::count_tokens;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

pub const DEFAULT_EMBED_DIM: usize = 512;
pub const DEFAULT_MAX_TOKENS: usize = 1600;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub values: Vec<f64>,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn cosine_similarity(&self, other: &Embedding) -> f64 {
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        let na: f64 = self.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb: f64 = other.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmbedError {
    /// Input exceeds the provider limit; the caller must re-segment.
    #[error("input is {tokens} tokens but the provider accepts at most {max}; split the prompt into more segments")]
    OverLimit { tokens: usize, max: usize },
    /// Transient transport problem; retriable.
    #[error("embedding transport failed: {0}")]
    Transport(String),
    #[error("provider returned dimension {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
}

impl EmbedError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, EmbedError::Transport(_))
    }
}

/// A pure function of (provider config, text).
pub trait EmbeddingProvider {
    fn dim(&self) -> usize;
    fn max_tokens(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Embedding, EmbedError>;
}

impl<T: EmbeddingProvider + ?Sized> EmbeddingProvider for alloc::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn max_tokens(&self) -> usize {
        (**self).max_tokens()
    }
    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        (**self).embed(text)
    }
}

impl<T: EmbeddingProvider + ?Sized> EmbeddingProvider for alloc::boxed::Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn max_tokens(&self) -> usize {
        (**self).max_tokens()
    }
    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        (**self).embed(text)
    }
}

/// Deterministic fallback embedder: signed character 3-grams hashed into
/// `dim` buckets, L2-normalized. The empty text maps to the zero vector.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    max_tokens: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder { dim: DEFAULT_EMBED_DIM, max_tokens: DEFAULT_MAX_TOKENS }
    }
}

impl HashEmbedder {
    pub fn new(dim: usize, max_tokens: usize) -> Self {
        HashEmbedder { dim, max_tokens }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl EmbeddingProvider for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        let tokens = count_tokens(text);
        if tokens > self.max_tokens {
            return Err(EmbedError::OverLimit { tokens, max: self.max_tokens });
        }
        let mut values = vec![0.0f64; self.dim];
        if text.is_empty() {
            return Ok(Embedding { values });
        }
        let chars: Vec<char> = text.chars().collect();
        let mut buf = [0u8; 16];
        let mut add_gram = |gram: &[char], values: &mut Vec<f64>| {
            let mut len = 0;
            for c in gram {
                len += c.encode_utf8(&mut buf[len..]).len();
            }
            let h = fnv1a(&buf[..len]);
            let bucket = (h % self.dim as u64) as usize;
            let sign = if h & (1 << 63) == 0 { 1.0 } else { -1.0 };
            values[bucket] += sign;
        };
        if chars.len() < 3 {
            add_gram(&chars, &mut values);
        } else {
            for gram in chars.windows(3) {
                add_gram(gram, &mut values);
            }
        }
        let norm: f64 = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        }
        Ok(Embedding { values })
    }
}

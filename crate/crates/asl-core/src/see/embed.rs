//! Deterministic hashed bag-of-n-grams text embedding.

use serde::{Deserialize, Serialize};

use crate::hashing;

use super::SeeError;

/// Name tag of the built-in embedding backend.
pub const HASHED_BACKEND: &str = "hashed-ngrams";

/// Embedding dimensions and hash salt.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedConfig {
    pub dim: usize,
    pub ngram: usize,
    pub salt: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig { dim: 256, ngram: 3, salt: 0x5ee_0002 }
    }
}

/// Unit-norm embedding vector plus the backend that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub vector: Vec<f64>,
    pub backend: String,
}

fn char_ngrams(token: &str, n: usize) -> Vec<String> {
    let chars: Vec<char> = token.chars().collect();
    if n == 0 || chars.len() < n {
        return Vec::new();
    }
    (0..=chars.len() - n).map(|i| chars[i..i + n].iter().collect()).collect()
}

/// Embeds text: lowercase, whitespace-tokenize, hash whole tokens and
/// character n-grams within tokens into `dim` buckets with counts, then
/// L2-normalize. Deterministic; entries nonnegative.
pub fn embed(cfg: &EmbedConfig, text: &str) -> Result<Embedding, SeeError> {
    if text.trim().is_empty() {
        return Err(SeeError::EmptyText);
    }
    let mut counts = vec![0.0f64; cfg.dim];
    let mut bump = |h: u64| counts[(h % cfg.dim as u64) as usize] += 1.0;
    for token in text.to_lowercase().split_whitespace() {
        bump(hashing::hash_parts(cfg.salt, &["tok", token]));
        for gram in char_ngrams(token, cfg.ngram) {
            bump(hashing::hash_parts(cfg.salt, &["gram", &gram]));
        }
    }
    let norm = counts.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(SeeError::ZeroEmbedding);
    }
    for x in counts.iter_mut() {
        *x /= norm;
    }
    Ok(Embedding { vector: counts, backend: HASHED_BACKEND.to_string() })
}

/// Cosine of two embeddings, clamped to [0, 1]. Bitwise-equal vectors score
/// exactly 1.0.
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64, SeeError> {
    if a.backend != b.backend || a.vector.len() != b.vector.len() {
        return Err(SeeError::BackendMismatch {
            a: format!("{}[{}]", a.backend, a.vector.len()),
            b: format!("{}[{}]", b.backend, b.vector.len()),
        });
    }
    if a.vector == b.vector {
        return Ok(1.0);
    }
    let dot: f64 = a.vector.iter().zip(&b.vector).map(|(x, y)| x * y).sum();
    Ok(dot.clamp(0.0, 1.0))
}

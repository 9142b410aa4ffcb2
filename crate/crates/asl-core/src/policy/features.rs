//! Hashed feature map for (observation, action) pairs.
//!
//! Features are hashed conjunctions of goal tokens, the action kind, target
//! label tokens and character n-grams, typed-text tokens, and the last
//! history entry, plus bias and kind markers. The raw listing index is never
//! featurized: two actions of the same kind targeting identically labeled
//! elements produce identical vectors wherever the elements sit.

use serde::{Deserialize, Serialize};

use crate::env::{Action, Observation};
use crate::hashing;

/// Dimensions and salt of the feature hash.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub dim: usize,
    pub ngram: usize,
    pub salt: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { dim: 512, ngram: 3, salt: 0x5eed_0001 }
    }
}

/// Dense feature vector of length `FeatureConfig::dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    #[must_use]
    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.0.iter().zip(weights).map(|(a, b)| a * b).sum()
    }
}

fn tokens(text: &str) -> Vec<String> {
    text.to_lowercase().split_whitespace().map(str::to_string).collect()
}

fn char_ngrams(token: &str, n: usize) -> Vec<String> {
    let chars: Vec<char> = token.chars().collect();
    if n == 0 || chars.len() < n {
        return Vec::new();
    }
    (0..=chars.len() - n).map(|i| chars[i..i + n].iter().collect()).collect()
}

/// Maps an action in the context of an observation to its feature vector.
#[must_use]
pub fn featurize(cfg: &FeatureConfig, obs: &Observation, action: &Action) -> FeatureVector {
    let mut values = vec![0.0; cfg.dim];
    let mut bump = |h: u64| values[(h % cfg.dim as u64) as usize] += 1.0;
    let kind = action.kind.name();

    bump(hashing::hash_parts(cfg.salt, &["bias"]));
    bump(hashing::hash_parts(cfg.salt, &["kind", kind]));
    for tok in tokens(&obs.goal) {
        bump(hashing::hash_parts(cfg.salt, &["goal", &tok, kind]));
    }
    if let Some(entry) = action.index.and_then(|i| obs.ui_listing.get(i)) {
        for tok in tokens(&entry.label) {
            bump(hashing::hash_parts(cfg.salt, &["label", &tok, kind]));
            for gram in char_ngrams(&tok, cfg.ngram) {
                bump(hashing::hash_parts(cfg.salt, &["labelgram", &gram, kind]));
            }
        }
        bump(hashing::hash_parts(cfg.salt, &["elkind", entry.kind.name(), kind]));
    }
    if let Some(text) = &action.text {
        for tok in tokens(text) {
            bump(hashing::hash_parts(cfg.salt, &["text", &tok, kind]));
        }
        bump(hashing::hash_parts(cfg.salt, &["textall", &text.to_lowercase(), kind]));
    }
    let last = obs.history.last().map(String::as_str).unwrap_or("<start>");
    bump(hashing::hash_parts(cfg.salt, &["hist", last, kind]));

    FeatureVector(values)
}

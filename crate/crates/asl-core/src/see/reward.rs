//! Semantic rewards: cosine similarity of transition descriptions, the
//! strict threshold rule, and reward shaping.

use super::embed::{cosine, embed, EmbedConfig};
use super::world_model::TransitionDescription;
use super::SeeError;

/// Raw and thresholded semantic score for one compared transition pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SemanticScore {
    pub raw: f64,
    pub thresholded: f64,
    pub tau: f64,
}

/// Cosine similarity of the two descriptions' embeddings in [0, 1].
/// Equal texts score exactly 1.0.
pub fn semantic_reward(
    cfg: &EmbedConfig,
    reference: &TransitionDescription,
    predicted: &TransitionDescription,
) -> Result<f64, SeeError> {
    let a = embed(cfg, &reference.text)?;
    let b = embed(cfg, &predicted.text)?;
    cosine(&a, &b)
}

/// `raw` if `raw > tau`, else 0. The inequality is strict: a score exactly
/// at the threshold is suppressed.
pub fn thresholded_reward(raw: f64, tau: f64) -> Result<f64, SeeError> {
    if !(0.0..=1.0).contains(&raw) {
        return Err(SeeError::OutOfRange { what: "raw score", value: raw });
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(SeeError::OutOfRange { what: "tau", value: tau });
    }
    Ok(if raw > tau { raw } else { 0.0 })
}

/// Combines both rules into one score record.
pub fn score_pair(
    cfg: &EmbedConfig,
    tau: f64,
    reference: &TransitionDescription,
    predicted: &TransitionDescription,
) -> Result<SemanticScore, SeeError> {
    let raw = semantic_reward(cfg, reference, predicted)?;
    let thresholded = thresholded_reward(raw, tau)?;
    Ok(SemanticScore { raw, thresholded, tau })
}

/// Shaped step reward: environment reward plus `beta` times the thresholded
/// semantic reward.
#[must_use]
pub fn shaped_reward(r_env: f64, r_tilde: f64, beta: f64) -> f64 {
    r_env + beta * r_tilde
}

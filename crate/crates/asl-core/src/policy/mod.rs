//! Featurized softmax policy: feature hashing, scoring, checkpoints.

mod checkpoint;
mod features;
mod softmax;

pub use checkpoint::{load_policy, save_policy};
pub use features::{featurize, FeatureConfig, FeatureVector};
pub use softmax::{greedy_index, sample_index, score_actions, PolicyParams, Scores};

/// Errors from scoring or persisting policies.
#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("weight vector has {got} entries, feature config wants {expected}")]
    Shape { expected: usize, got: usize },
    #[error("policy produced a non-finite value")]
    NonFinite,
    #[error("observation offers no actions")]
    NoActions,
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("{path}: not a policy checkpoint ({msg})")]
    Corrupt { path: String, msg: String },
}

//! Semantic rewards: world-model transition descriptions, hashed text
//! embeddings, cosine scoring with a strict threshold, and the memoizing
//! cache in front of the world model.

mod cache;
mod embed;
mod reward;
mod world_model;

pub use cache::{cached_description, cached_reward, CacheStats, DescriptionCache};
pub use embed::{cosine, embed, EmbedConfig, Embedding, HASHED_BACKEND};
pub use reward::{
    score_pair, semantic_reward, shaped_reward, thresholded_reward, SemanticScore,
};
pub use world_model::{
    describe_pair_remote, listing_strings, predict_transition, DescSource, RemotePair,
    TransitionDescription, WorldModelKind, WorldModelSpec,
};

/// One world model, one embedding space, one cache: everything a training
/// or scoring loop needs to turn (state, action, reference) into a reward.
#[derive(Debug, Default)]
pub struct SeeContext {
    pub world_model: WorldModelSpec,
    pub embed: EmbedConfig,
    pub cache: DescriptionCache,
}

impl SeeContext {
    #[must_use]
    pub fn new(world_model: WorldModelSpec, embed: EmbedConfig) -> Self {
        SeeContext { world_model, embed, cache: DescriptionCache::new() }
    }

    /// Memoized semantic score of `a_pred` against `a_ref` from `state`.
    pub fn reward(
        &self,
        scenario: &crate::env::Scenario,
        state: &crate::env::UiState,
        obs: &crate::env::Observation,
        a_pred: &crate::env::Action,
        a_ref: &crate::env::Action,
        tau: f64,
    ) -> Result<SemanticScore, SeeError> {
        cached_reward(
            &self.cache,
            &self.world_model,
            scenario,
            state,
            obs,
            a_pred,
            a_ref,
            &self.embed,
            tau,
        )
    }
}

/// Errors from embedding, scoring, or world-model queries.
#[derive(Debug, thiserror::Error)]
pub enum SeeError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding collapsed to the zero vector")]
    ZeroEmbedding,
    #[error("embedding backends differ: {a} vs {b}")]
    BackendMismatch { a: String, b: String },
    #[error("{what} = {value} is outside [0, 1]")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("transition description must be nonempty")]
    EmptyDescription,
    #[error("remote world model requires an endpoint")]
    MissingEndpoint,
    #[error("action {action} is not available on this screen")]
    UnknownAction { action: String },
    #[error("remote world model: {msg}")]
    Remote { msg: String },
    #[error("remote world model returned malformed output: {msg}")]
    MalformedRemote { msg: String },
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
}

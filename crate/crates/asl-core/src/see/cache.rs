//! Memoized transition descriptions, keyed so each (state, action) pair is
//! described at most once per scenario.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use crate::env::{Action, Observation, Scenario, UiState};

use super::embed::EmbedConfig;
use super::reward::{score_pair, SemanticScore};
use super::world_model::{
    describe_pair_remote, predict_transition, DescSource, TransitionDescription,
    WorldModelKind, WorldModelSpec,
};
use super::SeeError;

type Key = (String, u64, String);

/// Concurrent description cache with observable hit/miss counts. Duplicate
/// concurrent misses may both compute; values are idempotent so the last
/// write wins.
#[derive(Debug, Default)]
pub struct DescriptionCache {
    map: Mutex<HashMap<Key, TransitionDescription>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: usize,
}

impl DescriptionCache {
    #[must_use]
    pub fn new() -> Self {
        Self::default()
    }

    #[must_use]
    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: self.map.lock().expect("cache lock").len(),
        }
    }

    fn key(scenario: &Scenario, state: &UiState, action: &Action) -> Key {
        (scenario.name.clone(), state.digest(), action.canonical())
    }

    fn lookup(&self, key: &Key) -> Option<TransitionDescription> {
        let found = self.map.lock().expect("cache lock").get(key).cloned();
        match found {
            Some(d) => {
                self.hits.fetch_add(1, Ordering::Relaxed);
                Some(d)
            }
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }

    fn insert(&self, key: Key, desc: TransitionDescription) {
        self.map.lock().expect("cache lock").insert(key, desc);
    }
}

/// `predict_transition` behind the cache.
pub fn cached_description(
    cache: &DescriptionCache,
    wm: &WorldModelSpec,
    scenario: &Scenario,
    state: &UiState,
    obs: &Observation,
    action: &Action,
) -> Result<TransitionDescription, SeeError> {
    let key = DescriptionCache::key(scenario, state, action);
    if let Some(found) = cache.lookup(&key) {
        return Ok(found);
    }
    let desc = predict_transition(wm, scenario, state, obs, action)?;
    cache.insert(key, desc.clone());
    Ok(desc)
}

/// Semantic score of a predicted action against a reference action, with all
/// world-model queries memoized. On the remote backend a double miss is
/// resolved with a single pair request that fills both cache slots.
#[allow(clippy::too_many_arguments)]
pub fn cached_reward(
    cache: &DescriptionCache,
    wm: &WorldModelSpec,
    scenario: &Scenario,
    state: &UiState,
    obs: &Observation,
    a_pred: &Action,
    a_ref: &Action,
    embed_cfg: &EmbedConfig,
    tau: f64,
) -> Result<SemanticScore, SeeError> {
    if wm.kind == WorldModelKind::Remote && a_pred.canonical() != a_ref.canonical() {
        let key_pred = DescriptionCache::key(scenario, state, a_pred);
        let key_ref = DescriptionCache::key(scenario, state, a_ref);
        let found_pred = cache.lookup(&key_pred);
        let found_ref = cache.lookup(&key_ref);
        let (d_pred, d_ref) = match (found_pred, found_ref) {
            (Some(p), Some(r)) => (p, r),
            (cached_p, cached_r) => {
                let pair = describe_pair_remote(wm, obs, a_pred, a_ref)?;
                let d_pred = cached_p.map_or_else(
                    || TransitionDescription::new(pair.change1.clone(), DescSource::Remote),
                    Ok,
                )?;
                let d_ref = cached_r.map_or_else(
                    || TransitionDescription::new(pair.change2.clone(), DescSource::Remote),
                    Ok,
                )?;
                cache.insert(key_pred, d_pred.clone());
                cache.insert(key_ref, d_ref.clone());
                (d_pred, d_ref)
            }
        };
        return score_pair(embed_cfg, tau, &d_ref, &d_pred);
    }
    let d_pred = cached_description(cache, wm, scenario, state, obs, a_pred)?;
    let d_ref = cached_description(cache, wm, scenario, state, obs, a_ref)?;
    score_pair(embed_cfg, tau, &d_ref, &d_pred)
}

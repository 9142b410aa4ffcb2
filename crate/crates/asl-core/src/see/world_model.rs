//! World models that describe what a candidate action would change.
//!
//! The oracle backend replays the simulator and renders the canonical diff.
//! The remote backend POSTs the screen listing plus two candidate actions to
//! an HTTP service and extracts the per-action change strings. The service
//! also returns its own similarity score; it is parsed and carried along for
//! diagnostics but never used as the reward. The API key is read from an
//! environment variable at request time and is never written to errors or
//! logs.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::env::{
    enumerate_actions, observe, render_transition_diff, transition, Action, Observation,
    Scenario, UiState,
};

use super::SeeError;

/// Which backend produced a description.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescSource {
    Oracle,
    Remote,
}

/// A textual account of one state transition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionDescription {
    pub text: String,
    pub source: DescSource,
}

impl TransitionDescription {
    pub fn new(text: String, source: DescSource) -> Result<Self, SeeError> {
        if text.trim().is_empty() {
            return Err(SeeError::EmptyDescription);
        }
        Ok(TransitionDescription { text, source })
    }
}

/// Backend selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldModelKind {
    Oracle,
    Remote,
}

fn default_timeout_ms() -> u64 {
    10_000
}

fn default_retries() -> u32 {
    2
}

fn default_api_key_env() -> String {
    "WORLD_MODEL_API_KEY".to_string()
}

/// World-model configuration. `api_key_env` names the environment variable
/// holding the key; the key itself is never stored here.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldModelSpec {
    pub kind: WorldModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
}

impl Default for WorldModelSpec {
    fn default() -> Self {
        WorldModelSpec {
            kind: WorldModelKind::Oracle,
            endpoint: None,
            timeout_ms: default_timeout_ms(),
            retries: default_retries(),
            api_key_env: default_api_key_env(),
        }
    }
}

impl WorldModelSpec {
    pub fn validate(&self) -> Result<(), SeeError> {
        if self.kind == WorldModelKind::Remote && self.endpoint.is_none() {
            return Err(SeeError::MissingEndpoint);
        }
        Ok(())
    }
}

/// Renders the UI listing as the strings the remote protocol expects.
#[must_use]
pub fn listing_strings(obs: &Observation) -> Vec<String> {
    obs.ui_listing
        .iter()
        .map(|e| {
            if e.value.is_empty() {
                format!("{}: {} '{}'", e.index, e.kind.name(), e.label)
            } else {
                format!("{}: {} '{}' [{}]", e.index, e.kind.name(), e.label, e.value)
            }
        })
        .collect()
}

fn require_enumerated(obs: &Observation, action: &Action) -> Result<(), SeeError> {
    let key = action.canonical();
    if enumerate_actions(obs).iter().any(|a| a.canonical() == key) {
        Ok(())
    } else {
        Err(SeeError::UnknownAction { action: key })
    }
}

/// What one action would change, according to the configured backend.
pub fn predict_transition(
    wm: &WorldModelSpec,
    scenario: &Scenario,
    state: &UiState,
    obs: &Observation,
    action: &Action,
) -> Result<TransitionDescription, SeeError> {
    wm.validate()?;
    require_enumerated(obs, action)?;
    match wm.kind {
        WorldModelKind::Oracle => oracle_describe(scenario, state, obs, action),
        WorldModelKind::Remote => {
            let pair = describe_pair_remote(wm, obs, action, action)?;
            TransitionDescription::new(pair.change1, DescSource::Remote)
        }
    }
}

pub(super) fn oracle_describe(
    scenario: &Scenario,
    state: &UiState,
    obs: &Observation,
    action: &Action,
) -> Result<TransitionDescription, SeeError> {
    let after = transition(scenario, state, action)?;
    let after_obs =
        observe(scenario, &after, &obs.goal, &obs.history, &obs.input_candidates)?;
    TransitionDescription::new(render_transition_diff(obs, &after_obs), DescSource::Oracle)
}

/// Both change strings plus the service's self-reported similarity score.
#[derive(Clone, Debug)]
pub struct RemotePair {
    pub change1: String,
    pub change2: String,
    pub reported_score: f64,
}

#[derive(Deserialize)]
struct RemoteResponse {
    action1: String,
    action2: String,
    score: String,
}

/// One POST describing two candidate actions on the same screen.
pub fn describe_pair_remote(
    wm: &WorldModelSpec,
    obs: &Observation,
    action1: &Action,
    action2: &Action,
) -> Result<RemotePair, SeeError> {
    wm.validate()?;
    let endpoint = wm.endpoint.as_deref().ok_or(SeeError::MissingEndpoint)?;
    let body = serde_json::json!({
        "ui": listing_strings(obs),
        "action1": action1,
        "action2": action2,
    });
    let api_key = std::env::var(&wm.api_key_env).ok().filter(|k| !k.is_empty());

    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_millis(wm.timeout_ms)))
        .build()
        .into();

    let mut last_err = String::new();
    for attempt in 0..=wm.retries {
        if attempt > 0 {
            std::thread::sleep(Duration::from_millis(25 << attempt.min(6)));
        }
        let mut request = agent.post(endpoint);
        if let Some(key) = &api_key {
            request = request.header("authorization", &format!("Bearer {key}"));
        }
        let text = match request.send_json(&body) {
            Ok(mut resp) => match resp.body_mut().read_to_string() {
                Ok(text) => text,
                Err(e) => {
                    last_err = format!("reading response: {e}");
                    continue;
                }
            },
            Err(e) => {
                last_err = format!("request failed: {e}");
                continue;
            }
        };
        return parse_remote(&text);
    }
    Err(SeeError::Remote {
        msg: format!("{} attempts exhausted; last error: {last_err}", wm.retries + 1),
    })
}

fn parse_remote(text: &str) -> Result<RemotePair, SeeError> {
    let resp: RemoteResponse = serde_json::from_str(text)
        .map_err(|e| SeeError::MalformedRemote { msg: e.to_string() })?;
    if resp.action1.trim().is_empty() || resp.action2.trim().is_empty() {
        return Err(SeeError::MalformedRemote { msg: "empty change string".to_string() });
    }
    let reported_score: f64 = resp
        .score
        .trim()
        .parse()
        .map_err(|_| SeeError::MalformedRemote { msg: format!("score {:?}", resp.score) })?;
    if !(0.0..=1.0).contains(&reported_score) {
        return Err(SeeError::MalformedRemote {
            msg: format!("score {reported_score} outside [0, 1]"),
        });
    }
    Ok(RemotePair { change1: resp.action1, change2: resp.action2, reported_score })
}

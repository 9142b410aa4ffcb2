//! Observations, the per-screen action set, and transition-diff rendering.

use serde::{Deserialize, Serialize};

use super::action::Action;
use super::scenario::{ElementKind, Scenario, Task};
use super::state::UiState;
use super::EnvError;

/// One visible row of the UI listing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListingEntry {
    pub index: usize,
    pub element_id: String,
    pub label: String,
    pub kind: ElementKind,
    pub value: String,
}

/// What the agent sees: the goal, canonical strings of its past actions, and
/// the rendered screen. `input_candidates` carries the task's declared typing
/// vocabulary so the action set is derivable from the observation alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub goal: String,
    pub history: Vec<String>,
    pub screen_id: String,
    pub ui_listing: Vec<ListingEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toast: Option<String>,
    pub terminal: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub input_candidates: Vec<String>,
}

/// Renders a state into an observation. Pure: equal inputs give equal
/// observations.
pub fn observe(
    scenario: &Scenario,
    state: &UiState,
    goal: &str,
    history: &[String],
    input_candidates: &[String],
) -> Result<Observation, EnvError> {
    let screen = scenario
        .screen(&state.screen_id)
        .ok_or_else(|| EnvError::UnknownScreen { id: state.screen_id.clone() })?;
    let ui_listing = screen
        .elements
        .iter()
        .enumerate()
        .map(|(index, el)| {
            let value = match el.kind {
                ElementKind::TextField => state.field(&el.id).to_string(),
                ElementKind::Toggle => {
                    let flag = el.effect.toggle.as_deref().unwrap_or("");
                    if state.flag(flag) { "on".to_string() } else { "off".to_string() }
                }
                _ => String::new(),
            };
            ListingEntry {
                index,
                element_id: el.id.clone(),
                label: el.label.clone(),
                kind: el.kind,
                value,
            }
        })
        .collect();
    Ok(Observation {
        goal: goal.to_string(),
        history: history.to_vec(),
        screen_id: state.screen_id.clone(),
        ui_listing,
        toast: state.last_toast.clone(),
        terminal: state.terminal,
        input_candidates: input_candidates.to_vec(),
    })
}

/// Convenience wrapper taking the goal and candidates from a task.
pub fn observe_task(
    scenario: &Scenario,
    task: &Task,
    state: &UiState,
    history: &[String],
) -> Result<Observation, EnvError> {
    observe(scenario, state, &task.goal, history, &task.input_candidates)
}

/// The concrete action set on a screen: one click and one long press per
/// element, one input_text per text field and declared candidate, plus the
/// three global actions. Order is listing-major, globals last.
#[must_use]
pub fn enumerate_actions(obs: &Observation) -> Vec<Action> {
    let mut actions = Vec::new();
    for entry in &obs.ui_listing {
        actions.push(Action::click(entry.index));
        actions.push(Action::long_press(entry.index));
        if entry.kind == ElementKind::TextField {
            for cand in &obs.input_candidates {
                actions.push(Action::input_text(entry.index, cand.clone()));
            }
        }
    }
    actions.push(Action::navigate_back());
    actions.push(Action::navigate_home());
    actions.push(Action::status_complete());
    actions
}

fn push_part(parts: &mut Vec<String>, text: String) {
    parts.push(text);
}

/// Renders the visible difference between two observations as canonical,
/// deterministic text. Equal visible content yields exactly
/// "no visible change"; identical (before, after) pairs yield byte-identical
/// descriptions. Goal and history are ignored, they are not screen content.
#[must_use]
pub fn render_transition_diff(before: &Observation, after: &Observation) -> String {
    let mut parts: Vec<String> = Vec::new();
    if before.screen_id != after.screen_id {
        push_part(
            &mut parts,
            format!("screen changed from '{}' to '{}'", before.screen_id, after.screen_id),
        );
    }
    let before_ids: Vec<&str> = before.ui_listing.iter().map(|e| e.element_id.as_str()).collect();
    let after_ids: Vec<&str> = after.ui_listing.iter().map(|e| e.element_id.as_str()).collect();
    for entry in &before.ui_listing {
        if !after_ids.contains(&entry.element_id.as_str()) {
            push_part(&mut parts, format!("element '{}' disappeared", entry.label));
        }
    }
    for entry in &after.ui_listing {
        if !before_ids.contains(&entry.element_id.as_str()) {
            push_part(&mut parts, format!("element '{}' appeared", entry.label));
        }
    }
    for entry in &after.ui_listing {
        if let Some(prev) = before.ui_listing.iter().find(|e| e.element_id == entry.element_id) {
            if prev.label != entry.label {
                push_part(
                    &mut parts,
                    format!("element '{}' renamed to '{}'", prev.label, entry.label),
                );
            }
            if prev.value != entry.value {
                push_part(
                    &mut parts,
                    format!(
                        "value of '{}' changed from '{}' to '{}'",
                        entry.label, prev.value, entry.value
                    ),
                );
            }
        }
    }
    if before.toast != after.toast {
        if let Some(msg) = &after.toast {
            push_part(&mut parts, format!("toast shown: '{msg}'"));
        }
    }
    if !before.terminal && after.terminal {
        push_part(&mut parts, "session ended".to_string());
    }
    if parts.is_empty() {
        "no visible change".to_string()
    } else {
        parts.join("; ")
    }
}

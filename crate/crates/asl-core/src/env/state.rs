//! UI state and the deterministic transition function.
//!
//! A state is the current screen, the typed field values, the flag values,
//! the last toast, a step counter, and a terminal marker. Maps are kept
//! normalized (no empty-string fields, no false flags) so that value equality
//! is semantic equality and can be used directly for equivalence classes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::action::{Action, ActionKind};
use super::scenario::{ElementKind, Scenario, SuccessPredicate, Task, TransitionEffect};
use super::EnvError;
use crate::hashing;

/// Full simulator state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UiState {
    pub screen_id: String,
    pub field_values: BTreeMap<String, String>,
    pub flags: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_toast: Option<String>,
    pub step_count: usize,
    pub terminal: bool,
}

impl UiState {
    /// Value of a text field; unset fields read as empty.
    #[must_use]
    pub fn field(&self, id: &str) -> &str {
        self.field_values.get(id).map(String::as_str).unwrap_or("")
    }

    /// Value of a flag; unset flags read as false.
    #[must_use]
    pub fn flag(&self, name: &str) -> bool {
        self.flags.get(name).copied().unwrap_or(false)
    }

    /// State identity ignoring the step counter, for search and caching.
    #[must_use]
    pub fn key(&self) -> StateKey {
        StateKey {
            screen_id: self.screen_id.clone(),
            fields: self.field_values.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
            flags: self.flags.iter().map(|(k, v)| (k.clone(), *v)).collect(),
            toast: self.last_toast.clone(),
            terminal: self.terminal,
        }
    }

    /// Stable digest of the step-independent state identity.
    #[must_use]
    pub fn digest(&self) -> u64 {
        let mut h = hashing::fnv1a(self.screen_id.as_bytes());
        for (k, v) in &self.field_values {
            h = hashing::mix(h, hashing::hash_parts(1, &[k, v]));
        }
        for (k, v) in &self.flags {
            h = hashing::mix(h, hashing::hash_parts(2, &[k, if *v { "1" } else { "0" }]));
        }
        if let Some(t) = &self.last_toast {
            h = hashing::mix(h, hashing::hash_parts(3, &[t]));
        }
        hashing::mix(h, u64::from(self.terminal))
    }
}

/// Hashable identity of a state modulo `step_count`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StateKey {
    screen_id: String,
    fields: Vec<(String, String)>,
    flags: Vec<(String, bool)>,
    toast: Option<String>,
    terminal: bool,
}

/// Fresh state for a task.
pub fn initial_state(scenario: &Scenario, task: &Task) -> Result<UiState, EnvError> {
    if scenario.screen(&task.initial_screen).is_none() {
        return Err(EnvError::UnknownScreen { id: task.initial_screen.clone() });
    }
    Ok(UiState {
        screen_id: task.initial_screen.clone(),
        field_values: BTreeMap::new(),
        flags: BTreeMap::new(),
        last_toast: None,
        step_count: 0,
        terminal: false,
    })
}

fn apply_effect(scenario: &Scenario, state: &mut UiState, effect: &TransitionEffect) {
    if let Some(sf) = &effect.set_field {
        set_field(state, &sf.field, &sf.value);
    }
    if let Some(flag) = &effect.toggle {
        let flipped = !state.flag(flag);
        if flipped {
            state.flags.insert(flag.clone(), true);
        } else {
            state.flags.remove(flag);
        }
    }
    if let Some(msg) = &effect.toast {
        state.last_toast = Some(msg.clone());
    }
    if let Some(target) = &effect.goto {
        if scenario.screen(target).is_some() {
            state.screen_id = target.clone();
        }
    }
}

fn set_field(state: &mut UiState, field: &str, value: &str) {
    if value.is_empty() {
        state.field_values.remove(field);
    } else {
        state.field_values.insert(field.to_string(), value.to_string());
    }
}

/// Applies one action. Deterministic; invalid or inapplicable actions leave
/// everything but the step counter unchanged. Acting in a terminal state is
/// an error.
pub fn transition(scenario: &Scenario, state: &UiState, action: &Action) -> Result<UiState, EnvError> {
    if state.terminal {
        return Err(EnvError::TerminalTransition);
    }
    let screen = scenario
        .screen(&state.screen_id)
        .ok_or_else(|| EnvError::UnknownScreen { id: state.screen_id.clone() })?;
    let mut next = state.clone();
    next.step_count += 1;
    match action.kind {
        ActionKind::Click => {
            if let Some(el) = action.index.and_then(|i| screen.elements.get(i)) {
                apply_effect(scenario, &mut next, &el.effect);
            }
        }
        ActionKind::InputText => {
            if let (Some(el), Some(text)) =
                (action.index.and_then(|i| screen.elements.get(i)), action.text.as_ref())
            {
                if el.kind == ElementKind::TextField {
                    set_field(&mut next, &el.id, text);
                }
            }
        }
        ActionKind::NavigateHome => {
            next.screen_id = scenario.home_screen_id().to_string();
        }
        ActionKind::StatusComplete => {
            next.terminal = true;
        }
        ActionKind::LongPress
        | ActionKind::Scroll
        | ActionKind::NavigateBack
        | ActionKind::OpenApp
        | ActionKind::Answer => {}
    }
    Ok(next)
}

/// Whether a predicate holds in a state, ignoring the step budget.
#[must_use]
pub fn predicate_holds(pred: &SuccessPredicate, state: &UiState) -> bool {
    if let Some(screen) = &pred.screen_is {
        if &state.screen_id != screen {
            return false;
        }
    }
    for fe in &pred.field_equals {
        if state.field(&fe.field) != fe.value {
            return false;
        }
    }
    for fs in &pred.flags_set {
        if state.flag(&fs.flag) != fs.value {
            return false;
        }
    }
    true
}

/// Task success: the predicate holds and the step budget was respected
/// (inclusive bound).
#[must_use]
pub fn is_success(task: &Task, state: &UiState) -> bool {
    state.step_count <= task.max_steps && predicate_holds(&task.success, state)
}

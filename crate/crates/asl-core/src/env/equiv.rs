//! Action equivalence by induced transition: two actions are equivalent in a
//! state exactly when they produce equal next states. Computed by brute
//! force over the enumerated action set.

use super::action::Action;
use super::observe::{enumerate_actions, Observation};
use super::scenario::Scenario;
use super::state::{transition, UiState};
use super::EnvError;

/// Partitions the enumerated actions of `obs` into equivalence classes.
/// Classes are ordered by first occurrence in the enumeration; members keep
/// enumeration order. The union of all classes is exactly the action set.
pub fn equivalence_classes(
    scenario: &Scenario,
    state: &UiState,
    obs: &Observation,
) -> Result<Vec<Vec<Action>>, EnvError> {
    let actions = enumerate_actions(obs);
    let mut outcomes: Vec<UiState> = Vec::with_capacity(actions.len());
    for a in &actions {
        outcomes.push(transition(scenario, state, a)?);
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (i, outcome) in outcomes.iter().enumerate() {
        match classes.iter_mut().find(|c| &outcomes[c[0]] == outcome) {
            Some(class) => class.push(i),
            None => classes.push(vec![i]),
        }
    }
    Ok(classes
        .into_iter()
        .map(|idxs| idxs.into_iter().map(|i| actions[i].clone()).collect())
        .collect())
}

/// Whether two actions induce the same next state from `state`.
pub fn same_class(
    scenario: &Scenario,
    state: &UiState,
    a: &Action,
    b: &Action,
) -> Result<bool, EnvError> {
    Ok(transition(scenario, state, a)? == transition(scenario, state, b)?)
}

//! Exhaustive task solving.
//!
//! `solve` returns the lexicographically smallest shortest action sequence
//! that satisfies a task's predicate (paths compared as sequences of
//! canonical action strings). It doubles as the dataset annotator and, from
//! arbitrary states, as the teacher used during reinforcement-style rollouts.

use std::collections::HashMap;

use super::action::Action;
use super::observe::{enumerate_actions, observe_task};
use super::scenario::{Scenario, Task};
use super::state::{initial_state, predicate_holds, transition, StateKey, UiState};
use super::EnvError;

/// A solved path: `states` has one more entry than `actions`.
#[derive(Clone, Debug)]
pub struct Solution {
    pub actions: Vec<Action>,
    pub states: Vec<UiState>,
}

impl Solution {
    #[must_use]
    pub fn canonical_strings(&self) -> Vec<String> {
        self.actions.iter().map(Action::canonical).collect()
    }
}

/// Breadth-first search from `start`, bounded by `limit` steps.
///
/// Within a depth layer, states are expanded in order of their current best
/// path and successor actions in canonical-string order, so the first path
/// that reaches a goal state is the lexicographically smallest shortest one.
pub fn solve_from(
    scenario: &Scenario,
    task: &Task,
    start: &UiState,
    limit: Option<usize>,
) -> Result<Solution, EnvError> {
    let limit = limit.unwrap_or(usize::MAX);
    if predicate_holds(&task.success, start) {
        return Ok(Solution { actions: vec![], states: vec![start.clone()] });
    }

    struct Node {
        state: UiState,
        path: Vec<Action>,
        strings: Vec<String>,
    }

    let mut seen: HashMap<StateKey, ()> = HashMap::new();
    seen.insert(start.key(), ());
    let mut layer = vec![Node { state: start.clone(), path: vec![], strings: vec![] }];
    let mut depth = 0usize;

    while !layer.is_empty() && depth < limit {
        depth += 1;
        let mut next_layer: Vec<Node> = Vec::new();
        for node in &layer {
            if node.state.terminal {
                continue;
            }
            let obs = observe_task(scenario, task, &node.state, &node.strings)?;
            let mut actions = enumerate_actions(&obs);
            actions.sort_by_key(Action::canonical);
            for action in actions {
                let next = transition(scenario, &node.state, &action)?;
                let key = next.key();
                if seen.contains_key(&key) {
                    continue;
                }
                seen.insert(key, ());
                let mut path = node.path.clone();
                path.push(action.clone());
                let mut strings = node.strings.clone();
                strings.push(action.canonical());
                if predicate_holds(&task.success, &next) {
                    let mut states = Vec::with_capacity(path.len() + 1);
                    let mut cur = start.clone();
                    states.push(cur.clone());
                    for a in &path {
                        cur = transition(scenario, &cur, a)?;
                        states.push(cur.clone());
                    }
                    return Ok(Solution { actions: path, states });
                }
                next_layer.push(Node { state: next, path, strings });
            }
        }
        next_layer.sort_by(|a, b| a.strings.cmp(&b.strings));
        layer = next_layer;
    }

    Err(EnvError::Unsolvable { task: task.id.clone(), limit: if limit == usize::MAX { 0 } else { limit } })
}

/// Solves a task from its initial state within its own step budget.
pub fn solve(scenario: &Scenario, task: &Task) -> Result<Solution, EnvError> {
    let start = initial_state(scenario, task)?;
    solve_from(scenario, task, &start, Some(task.max_steps))
}

/// Reference action from an arbitrary mid-episode state: the first action of
/// the lexicographically smallest shortest completion, or `status_complete`
/// when the goal already holds, the state is terminal, or nothing reaches the
/// goal.
pub fn teacher_action(scenario: &Scenario, task: &Task, state: &UiState) -> Result<Action, EnvError> {
    if state.terminal || predicate_holds(&task.success, state) {
        return Ok(Action::status_complete());
    }
    match solve_from(scenario, task, state, None) {
        Ok(sol) => Ok(sol.actions.first().cloned().unwrap_or_else(Action::status_complete)),
        Err(EnvError::Unsolvable { .. }) => Ok(Action::status_complete()),
        Err(e) => Err(e),
    }
}

//! Scripted test-time perturbations.
//!
//! Each perturbation rewrites the scenario's surface (element order, labels,
//! duplicated controls, inserted distractors) while provably preserving task
//! completability. A perturbation is only accepted when every task remains
//! solvable within its budget and every task's annotated solution changes
//! syntactically in at least one step; otherwise generation retries with a
//! derived seed and eventually reports infeasibility.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::action::{Action, ActionKind};
use super::equiv::equivalence_classes;
use super::observe::observe_task;
use super::scenario::{ElementKind, Scenario, TransitionEffect, UiElement};
use super::solve::solve;
use super::EnvError;
use crate::rngs;

/// Available perturbation families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    IndexShuffle,
    SynonymRelabel,
    EquivalentPathRemoval,
    DistractorInsertion,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 4] = [
        PerturbationKind::IndexShuffle,
        PerturbationKind::SynonymRelabel,
        PerturbationKind::EquivalentPathRemoval,
        PerturbationKind::DistractorInsertion,
    ];

    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            PerturbationKind::IndexShuffle => "index_shuffle",
            PerturbationKind::SynonymRelabel => "synonym_relabel",
            PerturbationKind::EquivalentPathRemoval => "equivalent_path_removal",
            PerturbationKind::DistractorInsertion => "distractor_insertion",
        }
    }
}

impl std::str::FromStr for PerturbationKind {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PerturbationKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| EnvError::Invalid { what: format!("unknown perturbation kind '{s}'") })
    }
}

/// A perturbation request: what to do and which seed drives the choices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub seed: u64,
}

/// Per-task evidence that the perturbation is valid.
#[derive(Clone, Debug, Serialize)]
pub struct TaskPerturbEvidence {
    pub task_id: String,
    pub solution_len: usize,
    pub changed_steps: Vec<usize>,
}

/// Proof object returned alongside the perturbed scenario.
#[derive(Clone, Debug, Serialize)]
pub struct PerturbReport {
    pub kind: PerturbationKind,
    pub seed: u64,
    pub attempts: u32,
    pub tasks: Vec<TaskPerturbEvidence>,
}

const MAX_ATTEMPTS: u32 = 64;

const DISTRACTOR_LABELS: [&str; 8] =
    ["Promo", "Banner", "Survey", "Tips", "News", "Invite", "Trends", "Offers"];

/// Applies `spec` to `scenario`.
pub fn perturb(
    scenario: &Scenario,
    spec: &PerturbationSpec,
) -> Result<(Scenario, PerturbReport), EnvError> {
    let base_paths: Vec<Vec<String>> = scenario
        .tasks
        .iter()
        .map(|t| solve(scenario, t).map(|s| s.canonical_strings()))
        .collect::<Result<_, _>>()?;

    let mut last_reason = String::from("no attempt succeeded");
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = rngs::stream(spec.seed, spec.kind.name(), u64::from(attempt));
        let candidate = match spec.kind {
            PerturbationKind::IndexShuffle => apply_index_shuffle(scenario, &mut rng),
            PerturbationKind::SynonymRelabel => apply_synonym_relabel(scenario, &mut rng),
            PerturbationKind::EquivalentPathRemoval => apply_path_removal(scenario, &mut rng),
            PerturbationKind::DistractorInsertion => apply_distractor_insertion(scenario, &mut rng),
        };
        let mutated = match candidate {
            Ok(m) => m,
            Err(EnvError::PerturbationInfeasible { reason }) => {
                last_reason = reason;
                continue;
            }
            Err(e) => return Err(e),
        };
        if let Err(e) = mutated.validate() {
            last_reason = format!("mutated scenario invalid: {e}");
            continue;
        }
        match validate_against(&mutated, &base_paths) {
            Ok(tasks) => {
                return Ok((
                    mutated,
                    PerturbReport { kind: spec.kind, seed: spec.seed, attempts: attempt + 1, tasks },
                ))
            }
            Err(reason) => last_reason = reason,
        }
    }
    Err(EnvError::PerturbationInfeasible {
        reason: format!("{} (seed {}): {last_reason}", spec.kind.name(), spec.seed),
    })
}

/// Re-solves every task on the mutated scenario and demands a syntactic
/// change somewhere on each task's solution.
fn validate_against(
    mutated: &Scenario,
    base_paths: &[Vec<String>],
) -> Result<Vec<TaskPerturbEvidence>, String> {
    let mut evidence = Vec::with_capacity(mutated.tasks.len());
    for (task, base) in mutated.tasks.iter().zip(base_paths) {
        let sol = match solve(mutated, task) {
            Ok(s) => s,
            Err(e) => return Err(format!("task '{}' became unsolvable: {e}", task.id)),
        };
        let strings = sol.canonical_strings();
        let changed: Vec<usize> = (0..strings.len().max(base.len()))
            .filter(|&i| strings.get(i) != base.get(i))
            .collect();
        if changed.is_empty() {
            return Err(format!("task '{}' kept an identical annotated solution", task.id));
        }
        evidence.push(TaskPerturbEvidence {
            task_id: task.id.clone(),
            solution_len: strings.len(),
            changed_steps: changed,
        });
    }
    Ok(evidence)
}

fn infeasible(reason: impl Into<String>) -> EnvError {
    EnvError::PerturbationInfeasible { reason: reason.into() }
}

fn apply_index_shuffle(scenario: &Scenario, rng: &mut impl Rng) -> Result<Scenario, EnvError> {
    let mut out = scenario.clone();
    let mut moved = false;
    for screen in &mut out.screens {
        if screen.elements.len() >= 2 {
            screen.elements.shuffle(rng);
            moved = true;
        }
    }
    if !moved {
        return Err(infeasible("no screen has two or more elements"));
    }
    Ok(out)
}

/// Steps of a task's annotated solution whose action targets an element,
/// with the element's screen and position.
fn indexed_solution_steps(
    scenario: &Scenario,
    task: &super::scenario::Task,
) -> Result<Vec<(usize, String, usize)>, EnvError> {
    let sol = solve(scenario, task)?;
    let mut steps = Vec::new();
    for (i, action) in sol.actions.iter().enumerate() {
        if let Some(idx) = action.index {
            let screen_id = sol.states[i].screen_id.clone();
            steps.push((i, screen_id, idx));
        }
    }
    Ok(steps)
}

fn apply_synonym_relabel(scenario: &Scenario, rng: &mut impl Rng) -> Result<Scenario, EnvError> {
    let mut out = scenario.clone();
    let mut touched_screens: Vec<String> = Vec::new();
    for task in &scenario.tasks {
        let steps = indexed_solution_steps(scenario, task)?;
        let mut eligible: Vec<(String, usize)> = Vec::new();
        for (_, screen_id, idx) in &steps {
            let screen = scenario.screen(screen_id).expect("solution screen exists");
            if screen.elements.len() < 2 {
                continue;
            }
            let label = &screen.elements[*idx].label;
            if scenario.synonym_set_of(label).is_some() {
                eligible.push((screen_id.clone(), *idx));
            }
        }
        if eligible.is_empty() {
            return Err(infeasible(format!(
                "task '{}' has no solution step targeting a synonym-set label",
                task.id
            )));
        }
        let (screen_id, idx) = eligible[rng.gen_range(0..eligible.len())].clone();
        let set = scenario
            .synonym_set_of(&scenario.screen(&screen_id).unwrap().elements[idx].label)
            .expect("eligible label is in a set")
            .to_vec();
        let screen = out.screens.iter_mut().find(|s| s.id == screen_id).unwrap();
        let label = &mut screen.elements[idx].label;
        let pos = set.iter().position(|l| l == label).expect("label in its set");
        *label = set[(pos + 1) % set.len()].clone();
        if !touched_screens.contains(&screen_id) {
            touched_screens.push(screen_id);
        }
    }
    // A renamed control also moves: reshuffle the touched screens so the
    // annotated action strings change with the labels.
    for screen_id in touched_screens {
        let screen = out.screens.iter_mut().find(|s| s.id == screen_id).unwrap();
        screen.elements.shuffle(rng);
    }
    Ok(out)
}

fn remove_element(scenario: &Scenario, screen_id: &str, element_id: &str) -> Scenario {
    let mut out = scenario.clone();
    let screen = out.screens.iter_mut().find(|s| s.id == screen_id).expect("screen exists");
    screen.elements.retain(|e| e.id != element_id);
    out
}

fn apply_path_removal(scenario: &Scenario, rng: &mut impl Rng) -> Result<Scenario, EnvError> {
    let mut out = scenario.clone();
    for ti in 0..out.tasks.len() {
        let task = out.tasks[ti].clone();
        let sol = solve(&out, &task)?;
        let base = sol.canonical_strings();

        let mut candidates: Vec<(String, String)> = Vec::new();
        for (i, action) in sol.actions.iter().enumerate() {
            if action.kind != ActionKind::Click {
                continue;
            }
            let state = &sol.states[i];
            let obs = observe_task(&out, &task, state, &[])?;
            let classes = equivalence_classes(&out, state, &obs)?;
            let class = classes
                .iter()
                .find(|c| c.contains(action))
                .expect("solution action is enumerated");
            let clicks: Vec<usize> = class
                .iter()
                .filter(|a| a.kind == ActionKind::Click)
                .filter_map(|a| a.index)
                .collect();
            if clicks.len() < 2 {
                continue;
            }
            let screen = out.screen(&state.screen_id).expect("solution screen");
            for idx in clicks {
                candidates.push((state.screen_id.clone(), screen.elements[idx].id.clone()));
            }
        }
        candidates.sort();
        candidates.dedup();

        // A candidate counts only when its removal provably changes this
        // task's annotated solution and keeps every task solvable within
        // budget. Removing the used control can be a no-op syntactically
        // when the surviving sibling slides into the freed index, so each
        // removal is simulated rather than assumed.
        let valid: Vec<(String, String)> = candidates
            .into_iter()
            .filter(|(screen_id, element_id)| {
                let trial = remove_element(&out, screen_id, element_id);
                if trial.validate().is_err() {
                    return false;
                }
                match solve(&trial, &task) {
                    Ok(new_sol) if new_sol.canonical_strings() != base => {
                        out.tasks.iter().all(|t| solve(&trial, t).is_ok())
                    }
                    _ => false,
                }
            })
            .collect();
        if valid.is_empty() {
            return Err(infeasible(format!(
                "task '{}' has no removable control that changes its solution",
                task.id
            )));
        }
        let (screen_id, element_id) = &valid[rng.gen_range(0..valid.len())];
        out = remove_element(&out, screen_id, element_id);
    }
    Ok(out)
}

fn apply_distractor_insertion(scenario: &Scenario, rng: &mut impl Rng) -> Result<Scenario, EnvError> {
    let mut out = scenario.clone();
    for (counter, task) in scenario.tasks.iter().enumerate() {
        let steps = indexed_solution_steps(scenario, task)?;
        if steps.is_empty() {
            return Err(infeasible(format!(
                "task '{}' solution has no indexed action to displace",
                task.id
            )));
        }
        let (_, screen_id, idx) = steps[rng.gen_range(0..steps.len())].clone();
        let screen = out.screens.iter_mut().find(|s| s.id == screen_id).unwrap();
        let insert_at = rng.gen_range(0..=idx.min(screen.elements.len()));
        let label = DISTRACTOR_LABELS[rng.gen_range(0..DISTRACTOR_LABELS.len())];
        let element = UiElement {
            id: format!("distractor_{counter}"),
            label: label.to_string(),
            kind: ElementKind::Button,
            effect: TransitionEffect::default(),
        };
        screen.elements.insert(insert_at, element);
    }
    Ok(out)
}

/// Convenience: returns only the perturbed scenario.
pub fn perturb_scenario(
    scenario: &Scenario,
    spec: &PerturbationSpec,
) -> Result<Scenario, EnvError> {
    perturb(scenario, spec).map(|(sc, _)| sc)
}

// Ensures distinct actions exist after mutation: used by tests.
#[must_use]
pub fn annotated_first_actions(scenario: &Scenario) -> Vec<Option<Action>> {
    scenario
        .tasks
        .iter()
        .map(|t| solve(scenario, t).ok().and_then(|s| s.actions.first().cloned()))
        .collect()
}

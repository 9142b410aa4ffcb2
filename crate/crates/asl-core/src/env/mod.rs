//! Simulated UI environments: scenario schema, deterministic transitions,
//! observations, exhaustive solving, equivalence classes, perturbations, and
//! scenario generators.

mod action;
mod equiv;
mod generate;
mod observe;
mod perturb;
mod scenario;
mod solve;
mod state;

pub use action::{Action, ActionKind};
pub use equiv::{equivalence_classes, same_class};
pub use generate::{gen_scenarios, Family};
pub use observe::{
    enumerate_actions, observe, observe_task, render_transition_diff, ListingEntry, Observation,
};
pub use perturb::{
    annotated_first_actions, perturb, perturb_scenario, PerturbReport, PerturbationKind,
    PerturbationSpec, TaskPerturbEvidence,
};
pub use scenario::{
    load_scenario, save_scenario, ElementKind, FieldEquals, FlagSet, Scenario, Screen, SetField,
    SuccessPredicate, Task, TransitionEffect, UiElement,
};
pub use solve::{solve, solve_from, teacher_action, Solution};
pub use state::{initial_state, is_success, predicate_holds, transition, StateKey, UiState};

/// Environment-layer failures.
#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("cannot read or write '{path}': {msg}")]
    Io { path: String, msg: String },
    #[error("malformed scenario json at {path}:{line}:{column}: {msg}")]
    Parse { path: String, line: usize, column: usize, msg: String },
    #[error("invalid scenario: {what}")]
    Invalid { what: String },
    #[error("scenario '{scenario}' declares no tasks")]
    EmptyTasks { scenario: String },
    #[error("screen '{id}' does not exist")]
    UnknownScreen { id: String },
    #[error("task '{id}' does not exist")]
    UnknownTask { id: String },
    #[error("cannot act in a terminal state")]
    TerminalTransition,
    #[error("invalid action: {msg}")]
    InvalidAction { msg: String },
    #[error("task '{task}' has no solution within the step limit {limit}")]
    Unsolvable { task: String, limit: usize },
    #[error("perturbation infeasible: {reason}")]
    PerturbationInfeasible { reason: String },
    #[error("unknown scenario family '{name}'")]
    UnknownFamily { name: String },
}

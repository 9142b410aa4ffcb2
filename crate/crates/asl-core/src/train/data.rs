//! Step-level training samples distilled from solved tasks.

use serde::{Deserialize, Serialize};

use crate::env::{
    enumerate_actions, observe_task, solve, Action, Observation, Scenario, UiState,
};

use super::TrainError;

/// One supervised training datum: what the agent saw and the annotated
/// correct action. The pre-action state rides along so semantic scoring can
/// replay the transition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSample {
    pub scenario: String,
    pub task_id: String,
    pub step_index: usize,
    pub obs: Observation,
    pub state: UiState,
    pub ground_truth: Action,
}

impl StepSample {
    pub fn validate(&self) -> Result<(), TrainError> {
        let key = self.ground_truth.canonical();
        if enumerate_actions(&self.obs).iter().any(|a| a.canonical() == key) {
            Ok(())
        } else {
            Err(TrainError::GroundTruthMissing {
                task: self.task_id.clone(),
                step: self.step_index,
                action: key,
            })
        }
    }
}

/// Walks the annotated shortest solution of every task, emitting one sample
/// per step. Histories grow along the solution: step k sees the canonical
/// strings of steps 0..k.
pub fn annotate_dataset(scenarios: &[Scenario]) -> Result<Vec<StepSample>, TrainError> {
    let mut samples = Vec::new();
    for scenario in scenarios {
        for task in &scenario.tasks {
            let solution = solve(scenario, task)?;
            let mut history: Vec<String> = Vec::new();
            for (step_index, action) in solution.actions.iter().enumerate() {
                let state = &solution.states[step_index];
                let obs = observe_task(scenario, task, state, &history)?;
                let sample = StepSample {
                    scenario: scenario.name.clone(),
                    task_id: task.id.clone(),
                    step_index,
                    obs,
                    state: state.clone(),
                    ground_truth: action.clone(),
                };
                sample.validate()?;
                samples.push(sample);
                history.push(action.canonical());
            }
        }
    }
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    Ok(samples)
}

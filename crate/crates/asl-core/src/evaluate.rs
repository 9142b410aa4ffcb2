//! Policy evaluation: task and step success rates, robustness gaps under
//! scenario perturbations, and side-by-side agent comparisons.

use serde::Serialize;

use rand_chacha::ChaCha8Rng;

use crate::env::{
    initial_state, is_success, observe_task, same_class, transition, Action,
    EnvError, PerturbationKind, PerturbationSpec, Scenario, Task, UiState,
};
use crate::hashing;
use crate::par;
use crate::policy::{greedy_index, sample_index, score_actions, PolicyError, PolicyParams};
use crate::rngs::stream;
use crate::train::StepSample;

/// Errors from evaluation runs.
#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("nothing to evaluate")]
    NoTasks,
    #[error("dataset references unknown scenario {name}")]
    UnknownScenario { name: String },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Greedy rollouts are deterministic; sampled rollouts draw each step from
/// the policy with per-task streams derived from the seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    Greedy,
    Sampled { seed: u64 },
}

/// One executed episode.
#[derive(Clone, Debug, Serialize)]
pub struct Rollout {
    pub actions: Vec<Action>,
    pub states: Vec<UiState>,
    pub success: bool,
}

/// Runs the policy on one task until success, termination, or the step
/// budget. `rng: None` selects greedily.
pub fn run_policy(
    scenario: &Scenario,
    task: &Task,
    params: &PolicyParams,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<Rollout, EvalError> {
    let mut state = initial_state(scenario, task)?;
    let mut history: Vec<String> = Vec::new();
    let mut actions = Vec::new();
    let mut states = vec![state.clone()];
    loop {
        if is_success(task, &state) {
            return Ok(Rollout { actions, states, success: true });
        }
        if state.terminal || state.step_count >= task.max_steps {
            return Ok(Rollout { actions, states, success: false });
        }
        let obs = observe_task(scenario, task, &state, &history)?;
        let scores = score_actions(params, &obs)?;
        let idx = match rng.as_deref_mut() {
            None => greedy_index(&scores),
            Some(r) => sample_index(&scores, r),
        };
        let action = scores.actions[idx].clone();
        state = transition(scenario, &state, &action)?;
        history.push(action.canonical());
        actions.push(action);
        states.push(state.clone());
    }
}

/// Verdict for one evaluated task.
#[derive(Clone, Debug, Serialize)]
pub struct TaskOutcome {
    pub scenario: String,
    pub task_id: String,
    pub success: bool,
    pub steps: usize,
}

/// Task success rate over a suite.
#[derive(Clone, Debug)]
pub struct TsrResult {
    pub tsr: f64,
    pub outcomes: Vec<TaskOutcome>,
}

fn flat_tasks(scenarios: &[Scenario]) -> Vec<(usize, usize)> {
    let mut flat = Vec::new();
    for (si, scenario) in scenarios.iter().enumerate() {
        for ti in 0..scenario.tasks.len() {
            flat.push((si, ti));
        }
    }
    flat
}

/// Fraction of tasks the policy completes, with per-task outcomes in suite
/// order. Parallelizes across tasks; results are merged in task order.
pub fn eval_tsr(
    scenarios: &[Scenario],
    params: &PolicyParams,
    mode: EvalMode,
    threads: usize,
) -> Result<TsrResult, EvalError> {
    let flat = flat_tasks(scenarios);
    if flat.is_empty() {
        return Err(EvalError::NoTasks);
    }
    let jobs: Vec<(usize, usize, usize)> =
        flat.iter().enumerate().map(|(k, (si, ti))| (k, *si, *ti)).collect();
    let results = par::map_ordered(&jobs, threads, |(k, si, ti)| {
        let scenario = &scenarios[*si];
        let task = &scenario.tasks[*ti];
        let rollout = match mode {
            EvalMode::Greedy => run_policy(scenario, task, params, None),
            EvalMode::Sampled { seed } => {
                let mut rng = stream(seed, "eval", *k as u64);
                run_policy(scenario, task, params, Some(&mut rng))
            }
        }?;
        Ok(TaskOutcome {
            scenario: scenario.name.clone(),
            task_id: task.id.clone(),
            success: rollout.success,
            steps: rollout.actions.len(),
        })
    });
    let outcomes: Vec<TaskOutcome> = results.into_iter().collect::<Result<_, EvalError>>()?;
    let successes = outcomes.iter().filter(|o| o.success).count();
    Ok(TsrResult { tsr: successes as f64 / outcomes.len() as f64, outcomes })
}

/// Step success rates of the greedy policy on an annotated dataset: exact
/// string match and semantic equivalence-class match.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsrResult {
    pub exact: f64,
    pub class: f64,
}

pub fn eval_ssr(
    scenarios: &[Scenario],
    dataset: &[StepSample],
    params: &PolicyParams,
    threads: usize,
) -> Result<SsrResult, EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::NoTasks);
    }
    let results = par::map_ordered(dataset, threads, |sample| {
        let scenario = scenarios
            .iter()
            .find(|s| s.name == sample.scenario)
            .ok_or_else(|| EvalError::UnknownScenario { name: sample.scenario.clone() })?;
        let scores = score_actions(params, &sample.obs)?;
        let chosen = &scores.actions[greedy_index(&scores)];
        let exact = chosen.canonical() == sample.ground_truth.canonical();
        let class =
            exact || same_class(scenario, &sample.state, chosen, &sample.ground_truth)?;
        Ok((exact, class))
    });
    let marks: Vec<(bool, bool)> = results.into_iter().collect::<Result<_, EvalError>>()?;
    let n = marks.len() as f64;
    Ok(SsrResult {
        exact: marks.iter().filter(|(e, _)| *e).count() as f64 / n,
        class: marks.iter().filter(|(_, c)| *c).count() as f64 / n,
    })
}

/// Per-scenario perturbation seed: stable under suite reordering.
fn scenario_seed(seed: u64, scenario: &Scenario) -> u64 {
    hashing::hash_parts(seed, &["perturb", &scenario.name])
}

/// Applies one perturbation kind to every scenario of a suite.
pub fn perturb_suite(
    scenarios: &[Scenario],
    kind: PerturbationKind,
    seed: u64,
) -> Result<Vec<Scenario>, EnvError> {
    scenarios
        .iter()
        .map(|scenario| {
            let spec = PerturbationSpec { kind, seed: scenario_seed(seed, scenario) };
            crate::env::perturb_scenario(scenario, &spec)
        })
        .collect()
}

/// Robustness gap of one agent under one perturbation draw.
#[derive(Clone, Debug, Serialize)]
pub struct GapRow {
    pub suite: String,
    pub kind: PerturbationKind,
    pub seed: u64,
    pub clean_tsr: f64,
    pub perturbed_tsr: f64,
    pub delta: f64,
}

/// Clean-minus-perturbed TSR for every (kind, seed) pair. The clean TSR is
/// computed once and shared across rows.
pub fn ood_gap(
    suite: &str,
    scenarios: &[Scenario],
    params: &PolicyParams,
    kinds: &[PerturbationKind],
    seeds: &[u64],
    mode: EvalMode,
    threads: usize,
) -> Result<Vec<GapRow>, EvalError> {
    let clean = eval_tsr(scenarios, params, mode, threads)?.tsr;
    let mut rows = Vec::new();
    for &kind in kinds {
        for &seed in seeds {
            let perturbed = perturb_suite(scenarios, kind, seed)?;
            let tsr = eval_tsr(&perturbed, params, mode, threads)?.tsr;
            rows.push(GapRow {
                suite: suite.to_string(),
                kind,
                seed,
                clean_tsr: clean,
                perturbed_tsr: tsr,
                delta: clean - tsr,
            });
        }
    }
    Ok(rows)
}

/// One perturbed-suite evaluation of two agents side by side.
#[derive(Clone, Debug, Serialize)]
pub struct CompareRow {
    pub suite: String,
    pub perturbation: String,
    pub seed: u64,
    pub tsr_sft: f64,
    pub tsr_asl: f64,
    pub difference: f64,
}

/// Per-perturbation means over the seed draws. The `none` row carries the
/// clean TSRs.
#[derive(Clone, Debug, Serialize)]
pub struct CompareSummary {
    pub suite: String,
    pub perturbation: String,
    pub n: usize,
    pub mean_sft: f64,
    pub mean_asl: f64,
    pub mean_difference: f64,
}

#[derive(Clone, Debug)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub summary: Vec<CompareSummary>,
    pub clean_sft: f64,
    pub clean_asl: f64,
}

/// Evaluates two agents on identical perturbed suites: one row per
/// (kind, seed), both agents seeing the same draw.
#[allow(clippy::too_many_arguments)]
pub fn compare_agents(
    suite: &str,
    scenarios: &[Scenario],
    params_sft: &PolicyParams,
    params_asl: &PolicyParams,
    kinds: &[PerturbationKind],
    seeds: &[u64],
    mode: EvalMode,
    threads: usize,
) -> Result<CompareReport, EvalError> {
    let clean_sft = eval_tsr(scenarios, params_sft, mode, threads)?.tsr;
    let clean_asl = eval_tsr(scenarios, params_asl, mode, threads)?.tsr;
    let mut rows = Vec::new();
    let mut summary = vec![CompareSummary {
        suite: suite.to_string(),
        perturbation: "none".to_string(),
        n: 1,
        mean_sft: clean_sft,
        mean_asl: clean_asl,
        mean_difference: clean_asl - clean_sft,
    }];
    for &kind in kinds {
        let mut sum_sft = 0.0;
        let mut sum_asl = 0.0;
        for &seed in seeds {
            let perturbed = perturb_suite(scenarios, kind, seed)?;
            let tsr_sft = eval_tsr(&perturbed, params_sft, mode, threads)?.tsr;
            let tsr_asl = eval_tsr(&perturbed, params_asl, mode, threads)?.tsr;
            sum_sft += tsr_sft;
            sum_asl += tsr_asl;
            rows.push(CompareRow {
                suite: suite.to_string(),
                perturbation: kind.name().to_string(),
                seed,
                tsr_sft,
                tsr_asl,
                difference: tsr_asl - tsr_sft,
            });
        }
        let n = seeds.len();
        if n > 0 {
            summary.push(CompareSummary {
                suite: suite.to_string(),
                perturbation: kind.name().to_string(),
                n,
                mean_sft: sum_sft / n as f64,
                mean_asl: sum_asl / n as f64,
                mean_difference: (sum_asl - sum_sft) / n as f64,
            });
        }
    }
    Ok(CompareReport { rows, summary, clean_sft, clean_asl })
}

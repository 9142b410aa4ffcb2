//! RL fine-tuning on collected rollouts: advantage-filtered cloning with an
//! optional semantic bonus, and filtered behavior cloning with an optional
//! semantics-weighted term.
//!
//! The plain variants run the same code paths as their see-variants with
//! the semantic inputs forced to zero, so the documented reductions hold
//! step for step.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{
    initial_state, is_success, observe_task, teacher_action, transition, Action,
    Observation, Scenario, Task, UiState,
};
use crate::evaluate::{eval_tsr, EvalMode};
use crate::par;
use crate::policy::{sample_index, score_actions, FeatureConfig, PolicyParams};
use crate::rngs::stream;
use crate::runlog::{Cell, RunLog};
use crate::see::{shaped_reward, SeeContext};

use super::value::{fit_value, ValueFeatureConfig, ValueFn};
use super::TrainError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RlAlgorithm {
    FilteredBc,
    FilteredBcSee,
    Digirl,
    DigirlSee,
}

impl RlAlgorithm {
    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            RlAlgorithm::FilteredBc => "filtered_bc",
            RlAlgorithm::FilteredBcSee => "filtered_bc_see",
            RlAlgorithm::Digirl => "digirl",
            RlAlgorithm::DigirlSee => "digirl_see",
        }
    }

    fn uses_value_baseline(self) -> bool {
        matches!(self, RlAlgorithm::Digirl | RlAlgorithm::DigirlSee)
    }
}

/// Settings for one RL run. `init` warm-starts the policy; when absent the
/// run starts from zero weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlConfig {
    pub algorithm: RlAlgorithm,
    pub learning_rate: f64,
    pub iterations: usize,
    pub rollouts_per_task: usize,
    #[serde(default = "default_actor_epochs")]
    pub actor_epochs: usize,
    pub seed: u64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub feature_config: FeatureConfig,
    #[serde(default)]
    pub value_config: ValueFeatureConfig,
    #[serde(skip)]
    pub init: Option<PolicyParams>,
}

fn default_actor_epochs() -> usize {
    20
}
fn default_tau() -> f64 {
    0.6
}
fn default_beta() -> f64 {
    0.5
}
fn default_eta() -> f64 {
    0.5
}

impl RlConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |what: String| Err(TrainError::BadConfig { what });
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if self.iterations == 0 {
            return bad("iterations must be >= 1".into());
        }
        if self.rollouts_per_task == 0 {
            return bad("rollouts_per_task must be >= 1".into());
        }
        if self.actor_epochs == 0 {
            return bad("actor_epochs must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad(format!("tau {} outside [0, 1]", self.tau));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return bad(format!("beta {} must be nonnegative", self.beta));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("eta {} outside [0, 1]", self.eta));
        }
        Ok(())
    }
}

/// One executed step with everything later loss terms need.
#[derive(Clone, Debug, Serialize)]
pub struct TrajStep {
    pub obs: Observation,
    pub state: UiState,
    pub action: Action,
    pub log_prob: f64,
    pub teacher: Action,
    pub r_raw: f64,
    pub r_tilde: f64,
    pub r_env: f64,
}

/// One sampled episode.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub scenario: String,
    pub task_id: String,
    pub steps: Vec<TrajStep>,
    pub env_reward: f64,
    pub success: bool,
}

impl Trajectory {
    /// Internal consistency against the task that produced it.
    pub fn validate(&self, task: &Task) -> Result<(), TrainError> {
        let ok = self.steps.len() <= task.max_steps
            && self.env_reward == if self.success { 1.0 } else { 0.0 };
        if ok {
            Ok(())
        } else {
            Err(TrainError::BadConfig {
                what: format!("inconsistent trajectory for task {}", self.task_id),
            })
        }
    }
}

/// Shaped per-step reward: environment reward plus `beta` times the
/// thresholded semantic reward.
#[must_use]
pub fn augmented_reward(step: &TrajStep, beta: f64) -> f64 {
    shaped_reward(step.r_env, step.r_tilde, beta)
}

fn rollout_one(
    scenario: &Scenario,
    task: &Task,
    params: &PolicyParams,
    see: &SeeContext,
    tau: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory, TrainError> {
    let mut state = initial_state(scenario, task)?;
    let mut history: Vec<String> = Vec::new();
    let mut steps = Vec::new();
    let (success, env_reward);
    loop {
        if is_success(task, &state) {
            success = true;
            env_reward = 1.0;
            break;
        }
        if state.terminal || state.step_count >= task.max_steps {
            success = false;
            env_reward = 0.0;
            break;
        }
        let obs = observe_task(scenario, task, &state, &history)?;
        let scores = score_actions(params, &obs)?;
        let idx = sample_index(&scores, rng);
        let action = scores.actions[idx].clone();
        let teacher = teacher_action(scenario, task, &state)?;
        let semantic = see.reward(scenario, &state, &obs, &action, &teacher, tau)?;
        let next = transition(scenario, &state, &action)?;
        let r_env = if is_success(task, &next) { 1.0 } else { 0.0 };
        steps.push(TrajStep {
            obs,
            state: state.clone(),
            action: action.clone(),
            log_prob: scores.log_probs[idx],
            teacher,
            r_raw: semantic.raw,
            r_tilde: semantic.thresholded,
            r_env,
        });
        history.push(action.canonical());
        state = next;
    }
    Ok(Trajectory {
        scenario: scenario.name.clone(),
        task_id: task.id.clone(),
        steps,
        env_reward,
        success,
    })
}

/// Samples `per_task` episodes for every task of every scenario. Each
/// episode has its own RNG stream derived from (seed, round, flat index),
/// so results are identical across thread counts and collection order.
#[allow(clippy::too_many_arguments)]
pub fn collect_trajectories(
    scenarios: &[Scenario],
    params: &PolicyParams,
    per_task: usize,
    see: &SeeContext,
    tau: f64,
    seed: u64,
    round: u64,
    threads: usize,
) -> Result<Vec<Trajectory>, TrainError> {
    if per_task == 0 {
        return Err(TrainError::BadConfig { what: "per_task must be >= 1".into() });
    }
    let mut jobs = Vec::new();
    for (si, scenario) in scenarios.iter().enumerate() {
        for ti in 0..scenario.tasks.len() {
            for k in 0..per_task {
                jobs.push((si, ti, k));
            }
        }
    }
    if jobs.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let total = jobs.len() as u64;
    let results = par::map_ordered(&jobs, threads, |(si, ti, k)| {
        let flat = ((*si as u64) * 1_000 + (*ti as u64)) * per_task as u64 + *k as u64;
        let mut rng = stream(seed, "collect", round * total.max(1) * 1_000 + flat);
        rollout_one(
            &scenarios[*si],
            &scenarios[*si].tasks[*ti],
            params,
            see,
            tau,
            &mut rng,
        )
    });
    results.into_iter().collect()
}

/// Monte Carlo return at every step: the suffix sum of shaped rewards.
#[must_use]
pub fn monte_carlo_returns(traj: &Trajectory, beta: f64) -> Vec<f64> {
    let mut returns = vec![0.0; traj.steps.len()];
    let mut acc = 0.0;
    for i in (0..traj.steps.len()).rev() {
        acc += augmented_reward(&traj.steps[i], beta);
        returns[i] = acc;
    }
    returns
}

/// Step-level advantage: eta^(H-i) weights the terminal environment reward
/// against the shaped one-step temporal difference, with V defined as 0
/// beyond the final step.
pub fn advantage(
    traj: &Trajectory,
    i: usize,
    v: &ValueFn,
    eta: f64,
    beta: f64,
) -> Result<f64, TrainError> {
    let len = traj.steps.len();
    if i >= len {
        return Err(TrainError::StepIndex { index: i, len });
    }
    let h = len - 1;
    let w = eta.powi((h - i) as i32);
    let v_i = v.predict(&traj.steps[i].obs);
    let v_next = if i == h { 0.0 } else { v.predict(&traj.steps[i + 1].obs) };
    let td = v_next + augmented_reward(&traj.steps[i], beta) - v_i;
    Ok(w * traj.env_reward + (1.0 - w) * td)
}

/// Advantage-filtered cloning loss: zero unless the advantage is strictly
/// positive, else the negative log-likelihood of the taken action.
pub fn digirl_loss_and_grad(
    params: &PolicyParams,
    step: &TrajStep,
    advantage: f64,
) -> Result<(f64, Vec<f64>), TrainError> {
    let scores = score_actions(params, &step.obs)?;
    if advantage <= 0.0 {
        return Ok((0.0, vec![0.0; params.feature_config.dim]));
    }
    let idx = scores.position(&step.action).ok_or_else(|| TrainError::StepActionMissing {
        action: step.action.canonical(),
    })?;
    let loss = -scores.log_probs[idx];
    let grad: Vec<f64> = scores.grad_log_prob(idx).iter().map(|g| -g).collect();
    Ok((loss, grad))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FbcVariant {
    Plain,
    See,
}

/// Cloning loss over successful trajectories. The see variant adds the
/// semantics-weighted term with the collected thresholded reward; the plain
/// variant runs the identical path with that reward pinned to zero, which
/// reduces it to plain behavior cloning.
pub fn filtered_bc_loss_and_grad(
    params: &PolicyParams,
    step: &TrajStep,
    trajectory_success: bool,
    variant: FbcVariant,
) -> Result<(f64, Vec<f64>), TrainError> {
    if !trajectory_success {
        return Err(TrainError::FailedTrajectoryStep { task: step.obs.goal.clone() });
    }
    let r_tilde = match variant {
        FbcVariant::Plain => 0.0,
        FbcVariant::See => step.r_tilde,
    };
    let scores = score_actions(params, &step.obs)?;
    let idx = scores.position(&step.action).ok_or_else(|| TrainError::StepActionMissing {
        action: step.action.canonical(),
    })?;
    let log_prob = scores.log_probs[idx];
    let loss_sft = -log_prob;
    let alpha = (-loss_sft).exp();
    let lambda = 1.0 - (1.0 - alpha) * r_tilde;
    let loss_sem = -r_tilde * log_prob;
    let loss = loss_sem + lambda * loss_sft;
    let grad: Vec<f64> = scores
        .grad_log_prob(idx)
        .iter()
        .map(|g| -r_tilde * g + lambda * (-g))
        .collect();
    Ok((loss, grad))
}

struct TrainItem<'a> {
    step: &'a TrajStep,
    success: bool,
    advantage: f64,
}

/// The outer RL loop: collect, (optionally) fit the baseline and freeze
/// advantages, then clone through the matching loss for the configured
/// number of actor epochs, logging one row per iteration. Deterministic for
/// a fixed config and seed, including across thread counts.
pub fn rl_train(
    scenarios: &[Scenario],
    cfg: &RlConfig,
    see: &SeeContext,
    threads: usize,
) -> Result<(PolicyParams, RunLog), TrainError> {
    cfg.validate()?;
    let mut params = match &cfg.init {
        Some(p) => {
            p.validate()?;
            p.clone()
        }
        None => PolicyParams::zeros(cfg.feature_config),
    };
    let beta_eff = match cfg.algorithm {
        RlAlgorithm::Digirl => 0.0,
        _ => cfg.beta,
    };
    let mut log = RunLog::new(&[
        "iteration",
        "mean_env_reward",
        "mean_r_tilde",
        "mean_advantage",
        "eval_tsr",
    ]);

    for iteration in 0..cfg.iterations {
        let trajectories = collect_trajectories(
            scenarios,
            &params,
            cfg.rollouts_per_task,
            see,
            cfg.tau,
            cfg.seed,
            iteration as u64,
            threads,
        )?;
        let mean_env = trajectories.iter().map(|t| t.env_reward).sum::<f64>()
            / trajectories.len() as f64;
        let step_count: usize = trajectories.iter().map(|t| t.steps.len()).sum();
        let mean_r_tilde = if step_count == 0 {
            0.0
        } else {
            trajectories
                .iter()
                .flat_map(|t| &t.steps)
                .map(|s| s.r_tilde)
                .sum::<f64>()
                / step_count as f64
        };

        let mut items: Vec<TrainItem> = Vec::with_capacity(step_count);
        let mean_advantage = if cfg.algorithm.uses_value_baseline() {
            let mut fit_data: Vec<(&Observation, f64)> = Vec::with_capacity(step_count);
            for traj in &trajectories {
                let returns = monte_carlo_returns(traj, beta_eff);
                for (step, g) in traj.steps.iter().zip(returns) {
                    fit_data.push((&step.obs, g));
                }
            }
            if fit_data.is_empty() {
                return Err(TrainError::EmptyDataset);
            }
            let v = fit_value(&cfg.value_config, &fit_data)?;
            let mut sum_a = 0.0;
            for traj in &trajectories {
                for i in 0..traj.steps.len() {
                    let a = advantage(traj, i, &v, cfg.eta, beta_eff)?;
                    sum_a += a;
                    items.push(TrainItem {
                        step: &traj.steps[i],
                        success: traj.success,
                        advantage: a,
                    });
                }
            }
            if items.is_empty() { 0.0 } else { sum_a / items.len() as f64 }
        } else {
            for traj in trajectories.iter().filter(|t| t.success) {
                for step in &traj.steps {
                    items.push(TrainItem { step, success: true, advantage: 0.0 });
                }
            }
            0.0
        };

        for epoch in 0..cfg.actor_epochs {
            let mut order: Vec<usize> = (0..items.len()).collect();
            order.shuffle(&mut stream(
                cfg.seed,
                "rl-shuffle",
                (iteration * cfg.actor_epochs + epoch) as u64,
            ));
            for &j in &order {
                let item = &items[j];
                let (loss, grad) = match cfg.algorithm {
                    RlAlgorithm::Digirl | RlAlgorithm::DigirlSee => {
                        digirl_loss_and_grad(&params, item.step, item.advantage)?
                    }
                    RlAlgorithm::FilteredBc => filtered_bc_loss_and_grad(
                        &params,
                        item.step,
                        item.success,
                        FbcVariant::Plain,
                    )?,
                    RlAlgorithm::FilteredBcSee => filtered_bc_loss_and_grad(
                        &params,
                        item.step,
                        item.success,
                        FbcVariant::See,
                    )?,
                };
                if !loss.is_finite() {
                    return Err(TrainError::Divergence {
                        epoch: iteration,
                        what: format!("loss {loss} in actor epoch {epoch}"),
                    });
                }
                for (w, g) in params.weights.iter_mut().zip(&grad) {
                    *w -= cfg.learning_rate * g;
                }
            }
        }

        let eval = eval_tsr(scenarios, &params, EvalMode::Greedy, threads)
            .map_err(|e| TrainError::Eval { msg: e.to_string() })?;
        log.push(vec![
            Cell::Int(iteration as i64),
            Cell::Float(mean_env),
            Cell::Float(mean_r_tilde),
            Cell::Float(mean_advantage),
            Cell::Float(eval.tsr),
        ]);
    }
    Ok((params, log))
}

//! Supervised training: likelihood cloning of annotated actions (sft) and
//! the semantics-aware combined objective (asl).
//!
//! The semantic term scores one action sampled from the current policy
//! against the annotation via the world model, REINFORCE-style: the reward
//! multiplies the log-likelihood gradient and is never differentiated
//! through. The combined loss mixes in the cloning term with weight
//! lambda = 1 - (1 - alpha) * r where alpha is the detached annotation
//! likelihood, so confident-and-semantically-right samples lean on the
//! semantic term while everything else falls back to cloning.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, Scenario};
use crate::policy::{
    greedy_index, sample_index, score_actions, FeatureConfig, PolicyParams,
};
use crate::rngs::stream;
use crate::runlog::{Cell, RunLog};
use crate::see::SeeContext;

use super::data::StepSample;
use super::TrainError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupervisedAlgorithm {
    Sft,
    Asl,
}

/// Settings for one supervised run. `exact_expectation` replaces the
/// single-sample semantic estimator with full enumeration over the action
/// set; it exists for testing the estimator, not for speed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupervisedConfig {
    pub algorithm: SupervisedAlgorithm,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default)]
    pub feature_config: FeatureConfig,
    #[serde(default)]
    pub exact_expectation: bool,
}

impl SupervisedConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(TrainError::BadConfig {
                what: format!("learning_rate {} must be positive", self.learning_rate),
            });
        }
        if self.epochs == 0 {
            return Err(TrainError::BadConfig { what: "epochs must be >= 1".into() });
        }
        Ok(())
    }
}

/// Cloning loss at the annotated action: negative log-likelihood and its
/// gradient.
pub fn sft_loss_and_grad(
    params: &PolicyParams,
    sample: &StepSample,
) -> Result<(f64, Vec<f64>), TrainError> {
    let scores = score_actions(params, &sample.obs)?;
    let idx = scores.position(&sample.ground_truth).ok_or_else(|| {
        TrainError::GroundTruthMissing {
            task: sample.task_id.clone(),
            step: sample.step_index,
            action: sample.ground_truth.canonical(),
        }
    })?;
    let loss = -scores.log_probs[idx];
    let grad: Vec<f64> = scores.grad_log_prob(idx).iter().map(|g| -g).collect();
    Ok((loss, grad))
}

/// One semantic-loss draw.
#[derive(Clone, Debug)]
pub struct SemanticOutcome {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub action: Action,
    pub raw_reward: f64,
}

/// Single-sample semantic loss: draw a ~ policy, score it against the
/// annotation, return -r * log p(a) with the REINFORCE gradient
/// -r * grad log p(a). The reward is the raw cosine score, unthresholded.
pub fn semantic_loss_and_grad(
    params: &PolicyParams,
    scenario: &Scenario,
    sample: &StepSample,
    see: &SeeContext,
    rng: &mut ChaCha8Rng,
) -> Result<SemanticOutcome, TrainError> {
    let scores = score_actions(params, &sample.obs)?;
    let idx = sample_index(&scores, rng);
    let action = scores.actions[idx].clone();
    let raw_reward = see
        .reward(scenario, &sample.state, &sample.obs, &action, &sample.ground_truth, 0.0)?
        .raw;
    let loss = -raw_reward * scores.log_probs[idx];
    let grad: Vec<f64> =
        scores.grad_log_prob(idx).iter().map(|g| -raw_reward * g).collect();
    Ok(SemanticOutcome { loss, grad, action, raw_reward })
}

/// Exact-expectation semantic loss: enumerate every action, weight by the
/// policy probabilities. Returns (loss, gradient, expected reward).
pub fn semantic_loss_and_grad_exact(
    params: &PolicyParams,
    scenario: &Scenario,
    sample: &StepSample,
    see: &SeeContext,
) -> Result<(f64, Vec<f64>, f64), TrainError> {
    let scores = score_actions(params, &sample.obs)?;
    let dim = params.feature_config.dim;
    let mut loss = 0.0;
    let mut grad = vec![0.0; dim];
    let mut mean_r = 0.0;
    for idx in 0..scores.actions.len() {
        let r = see
            .reward(
                scenario,
                &sample.state,
                &sample.obs,
                &scores.actions[idx],
                &sample.ground_truth,
                0.0,
            )?
            .raw;
        let p = scores.probs[idx];
        loss += p * (-r * scores.log_probs[idx]);
        mean_r += p * r;
        for (g, glp) in grad.iter_mut().zip(scores.grad_log_prob(idx)) {
            *g += p * (-r * glp);
        }
    }
    Ok((loss, grad, mean_r))
}

/// One combined-loss evaluation with its diagnostics.
#[derive(Clone, Debug)]
pub struct AslOutcome {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub loss_sft: f64,
    pub loss_sem: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub raw_reward: f64,
    pub sampled: Option<Action>,
}

fn combine(
    loss_sft: f64,
    grad_sft: &[f64],
    loss_sem: f64,
    grad_sem: &[f64],
    raw_reward: f64,
    sampled: Option<Action>,
) -> AslOutcome {
    let alpha = (-loss_sft).exp();
    let lambda = 1.0 - (1.0 - alpha) * raw_reward;
    let loss = loss_sem + lambda * loss_sft;
    let grad: Vec<f64> =
        grad_sem.iter().zip(grad_sft).map(|(s, f)| s + lambda * f).collect();
    AslOutcome {
        loss,
        grad,
        loss_sft,
        loss_sem,
        alpha,
        lambda,
        raw_reward,
        sampled,
    }
}

/// Combined loss: semantic term plus lambda-weighted cloning term. Alpha
/// (the annotation likelihood) and the reward enter lambda as constants;
/// the gradient flows only through the two log-likelihood terms.
pub fn asl_loss_and_grad(
    params: &PolicyParams,
    scenario: &Scenario,
    sample: &StepSample,
    see: &SeeContext,
    rng: &mut ChaCha8Rng,
) -> Result<AslOutcome, TrainError> {
    let (loss_sft, grad_sft) = sft_loss_and_grad(params, sample)?;
    let sem = semantic_loss_and_grad(params, scenario, sample, see, rng)?;
    Ok(combine(
        loss_sft,
        &grad_sft,
        sem.loss,
        &sem.grad,
        sem.raw_reward,
        Some(sem.action),
    ))
}

/// Exact-expectation combined loss; lambda uses the expected reward.
pub fn asl_loss_and_grad_exact(
    params: &PolicyParams,
    scenario: &Scenario,
    sample: &StepSample,
    see: &SeeContext,
) -> Result<AslOutcome, TrainError> {
    let (loss_sft, grad_sft) = sft_loss_and_grad(params, sample)?;
    let (loss_sem, grad_sem, mean_r) =
        semantic_loss_and_grad_exact(params, scenario, sample, see)?;
    Ok(combine(loss_sft, &grad_sft, loss_sem, &grad_sem, mean_r, None))
}

pub(super) fn scenario_map(scenarios: &[Scenario]) -> BTreeMap<&str, &Scenario> {
    scenarios.iter().map(|s| (s.name.as_str(), s)).collect()
}

pub(super) fn lookup<'a>(
    map: &BTreeMap<&'a str, &'a Scenario>,
    name: &str,
) -> Result<&'a Scenario, TrainError> {
    map.get(name).copied().ok_or_else(|| TrainError::UnknownScenario { name: name.into() })
}

fn exact_match_ssr(
    params: &PolicyParams,
    dataset: &[StepSample],
) -> Result<f64, TrainError> {
    let mut correct = 0usize;
    for sample in dataset {
        let scores = score_actions(params, &sample.obs)?;
        let idx = greedy_index(&scores);
        if scores.actions[idx].canonical() == sample.ground_truth.canonical() {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

/// Runs SGD over the dataset. One update per sample, per-epoch reshuffle,
/// all randomness derived from the config seed. Returns the trained weights
/// and a log with one row per epoch.
pub fn train_supervised(
    scenarios: &[Scenario],
    dataset: &[StepSample],
    cfg: &SupervisedConfig,
    see: &SeeContext,
) -> Result<(PolicyParams, RunLog), TrainError> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let map = scenario_map(scenarios);
    for sample in dataset {
        lookup(&map, &sample.scenario)?;
    }

    let mut params = PolicyParams::zeros(cfg.feature_config);
    let mut log = RunLog::new(&[
        "epoch",
        "loss_sft",
        "loss_sem",
        "mean_r",
        "mean_lambda",
        "train_ssr",
    ]);
    let n = dataset.len();

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream(cfg.seed, "shuffle", epoch as u64));

        let mut sum_sft = 0.0;
        let mut sum_sem = 0.0;
        let mut sum_r = 0.0;
        let mut sum_lambda = 0.0;

        for (j, &i) in order.iter().enumerate() {
            let sample = &dataset[i];
            let scenario = lookup(&map, &sample.scenario)?;
            let (loss, grad) = match cfg.algorithm {
                SupervisedAlgorithm::Sft => {
                    let (loss, grad) = sft_loss_and_grad(&params, sample)?;
                    sum_sft += loss;
                    sum_lambda += 1.0;
                    (loss, grad)
                }
                SupervisedAlgorithm::Asl => {
                    let out = if cfg.exact_expectation {
                        asl_loss_and_grad_exact(&params, scenario, sample, see)?
                    } else {
                        let mut rng =
                            stream(cfg.seed, "sample", (epoch * n + j) as u64);
                        asl_loss_and_grad(&params, scenario, sample, see, &mut rng)?
                    };
                    sum_sft += out.loss_sft;
                    sum_sem += out.loss_sem;
                    sum_r += out.raw_reward;
                    sum_lambda += out.lambda;
                    (out.loss, out.grad)
                }
            };
            if !loss.is_finite() {
                return Err(TrainError::Divergence {
                    epoch,
                    what: format!("loss {loss} on task {}", sample.task_id),
                });
            }
            for (w, g) in params.weights.iter_mut().zip(&grad) {
                *w -= cfg.learning_rate * g;
            }
        }

        let train_ssr = exact_match_ssr(&params, dataset)?;
        let denom = n as f64;
        log.push(vec![
            Cell::Int(epoch as i64),
            Cell::Float(sum_sft / denom),
            Cell::Float(sum_sem / denom),
            Cell::Float(sum_r / denom),
            Cell::Float(sum_lambda / denom),
            Cell::Float(train_ssr),
        ]);
    }
    Ok((params, log))
}

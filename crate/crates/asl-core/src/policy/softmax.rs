//! Linear softmax policy over enumerated actions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{enumerate_actions, Action, Observation};

use super::features::{featurize, FeatureConfig, FeatureVector};
use super::PolicyError;

/// Weight vector plus the feature map it was trained with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyParams {
    pub feature_config: FeatureConfig,
    pub weights: Vec<f64>,
}

impl PolicyParams {
    #[must_use]
    pub fn zeros(feature_config: FeatureConfig) -> Self {
        let weights = vec![0.0; feature_config.dim];
        PolicyParams { feature_config, weights }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.weights.len() != self.feature_config.dim {
            return Err(PolicyError::Shape {
                expected: self.feature_config.dim,
                got: self.weights.len(),
            });
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(PolicyError::NonFinite);
        }
        Ok(())
    }
}

/// Softmax scores for every enumerated action of one observation.
#[derive(Clone, Debug)]
pub struct Scores {
    pub actions: Vec<Action>,
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub features: Vec<FeatureVector>,
}

impl Scores {
    /// Position of an action in the enumeration, by canonical string.
    #[must_use]
    pub fn position(&self, action: &Action) -> Option<usize> {
        let key = action.canonical();
        self.actions.iter().position(|a| a.canonical() == key)
    }

    /// Gradient of `log p(actions[idx])` with respect to the weights.
    #[must_use]
    pub fn grad_log_prob(&self, idx: usize) -> Vec<f64> {
        let dim = self.features[idx].0.len();
        let mut grad = self.features[idx].0.clone();
        let mut expected = vec![0.0; dim];
        for (p, phi) in self.probs.iter().zip(&self.features) {
            for (e, x) in expected.iter_mut().zip(&phi.0) {
                *e += p * x;
            }
        }
        for (g, e) in grad.iter_mut().zip(&expected) {
            *g -= e;
        }
        grad
    }
}

/// Scores all actions available in `obs` under `params`.
pub fn score_actions(params: &PolicyParams, obs: &Observation) -> Result<Scores, PolicyError> {
    params.validate()?;
    let actions = enumerate_actions(obs);
    if actions.is_empty() {
        return Err(PolicyError::NoActions);
    }
    let features: Vec<FeatureVector> =
        actions.iter().map(|a| featurize(&params.feature_config, obs, a)).collect();
    let logits: Vec<f64> = features.iter().map(|phi| phi.dot(&params.weights)).collect();
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(PolicyError::NonFinite);
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = logits.iter().map(|x| x - max).collect();
    let denom: f64 = shifted.iter().map(|x| x.exp()).sum();
    let log_denom = denom.ln();
    let log_probs: Vec<f64> = shifted.iter().map(|x| x - log_denom).collect();
    let probs: Vec<f64> = log_probs.iter().map(|x| x.exp()).collect();
    Ok(Scores { actions, probs, log_probs, features })
}

/// Samples an action index by inverse CDF in enumeration order.
pub fn sample_index<R: Rng>(scores: &Scores, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in scores.probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    scores.probs.len() - 1
}

/// Highest-probability action; ties go to the smaller canonical string.
#[must_use]
pub fn greedy_index(scores: &Scores) -> usize {
    let mut best = 0;
    for i in 1..scores.probs.len() {
        let better = scores.probs[i] > scores.probs[best] + 1e-12;
        let tied = (scores.probs[i] - scores.probs[best]).abs() <= 1e-12;
        if better
            || (tied && scores.actions[i].canonical() < scores.actions[best].canonical())
        {
            best = i;
        }
    }
    best
}

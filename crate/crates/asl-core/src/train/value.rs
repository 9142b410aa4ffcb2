//! Linear state-value baseline fit by least squares on observed returns.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::hashing;

use super::TrainError;

/// Dimensions and salt of the value-feature hash.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueFeatureConfig {
    pub dim: usize,
    pub salt: u64,
}

impl Default for ValueFeatureConfig {
    fn default() -> Self {
        ValueFeatureConfig { dim: 64, salt: 0x5eed_0003 }
    }
}

/// Observation features for value prediction: bias, screen identity, goal
/// tokens, visible labels, and a capped history-length bucket.
#[must_use]
pub fn value_features(cfg: &ValueFeatureConfig, obs: &Observation) -> Vec<f64> {
    let mut values = vec![0.0; cfg.dim];
    let mut bump = |h: u64| values[(h % cfg.dim as u64) as usize] += 1.0;
    bump(hashing::hash_parts(cfg.salt, &["bias"]));
    bump(hashing::hash_parts(cfg.salt, &["screen", &obs.screen_id]));
    for tok in obs.goal.to_lowercase().split_whitespace() {
        bump(hashing::hash_parts(cfg.salt, &["goal", tok]));
    }
    for entry in &obs.ui_listing {
        bump(hashing::hash_parts(cfg.salt, &["label", &entry.label.to_lowercase()]));
    }
    let bucket = obs.history.len().min(6).to_string();
    bump(hashing::hash_parts(cfg.salt, &["hist", &bucket]));
    values
}

/// Fitted linear value function. `ridge_used` records that the plain
/// normal equations were degenerate and a small ridge was added.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueFn {
    pub config: ValueFeatureConfig,
    pub weights: Vec<f64>,
    pub ridge_used: bool,
}

impl ValueFn {
    #[must_use]
    pub fn predict(&self, obs: &Observation) -> f64 {
        value_features(&self.config, obs)
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| x * w)
            .sum()
    }
}

const RIDGE: f64 = 1e-6;

fn normal_equations(
    cfg: &ValueFeatureConfig,
    data: &[(&Observation, f64)],
) -> (DMatrix<f64>, DVector<f64>) {
    let d = cfg.dim;
    let mut xtx = DMatrix::zeros(d, d);
    let mut xty = DVector::zeros(d);
    for (obs, y) in data {
        let phi = value_features(cfg, obs);
        for i in 0..d {
            if phi[i] == 0.0 {
                continue;
            }
            xty[i] += phi[i] * y;
            for j in 0..d {
                xtx[(i, j)] += phi[i] * phi[j];
            }
        }
    }
    (xtx, xty)
}

fn solve_checked(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let w = a.clone().lu().solve(b)?;
    if w.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let residual = a * &w - b;
    let scale = b.amax().max(1.0);
    if residual.amax() > 1e-6 * scale {
        return None;
    }
    Some(w)
}

/// Least-squares fit of value features to returns via the normal equations.
/// A degenerate system falls back to ridge regression with a fixed ridge of
/// 1e-6, reported through `ridge_used`. Deterministic.
pub fn fit_value(
    cfg: &ValueFeatureConfig,
    data: &[(&Observation, f64)],
) -> Result<ValueFn, TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if let Some((_, bad)) = data.iter().find(|(_, y)| !y.is_finite()) {
        return Err(TrainError::ValueFit { msg: format!("non-finite return {bad}") });
    }
    let (xtx, xty) = normal_equations(cfg, data);
    if let Some(w) = solve_checked(&xtx, &xty) {
        return Ok(ValueFn {
            config: *cfg,
            weights: w.iter().copied().collect(),
            ridge_used: false,
        });
    }
    let ridged = &xtx + DMatrix::identity(cfg.dim, cfg.dim) * RIDGE;
    match ridged.clone().lu().solve(&xty) {
        Some(w) if w.iter().all(|x| x.is_finite()) => Ok(ValueFn {
            config: *cfg,
            weights: w.iter().copied().collect(),
            ridge_used: true,
        }),
        _ => Err(TrainError::ValueFit { msg: "ridge solve failed".to_string() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{gen_scenarios, initial_state, observe_task, transition, Family};
    use crate::env::{Action, Observation, Scenario};

    fn observations() -> (Scenario, Vec<Observation>) {
        let sc = gen_scenarios(Family::MenuTree, 1, 51).unwrap().remove(0);
        let task = sc.tasks[0].clone();
        let mut state = initial_state(&sc, &task).unwrap();
        let mut obs = vec![observe_task(&sc, &task, &state, &[]).unwrap()];
        let mut history = Vec::new();
        for action in [Action::click(0), Action::navigate_back()] {
            state = transition(&sc, &state, &action).unwrap();
            history.push(action.canonical());
            obs.push(observe_task(&sc, &task, &state, &history).unwrap());
        }
        (sc, obs)
    }

    #[test]
    fn constant_returns_give_constant_predictor() {
        let cfg = ValueFeatureConfig { dim: 32, salt: 7 };
        let (_, obs) = observations();
        let data: Vec<(&Observation, f64)> = obs.iter().map(|o| (o, 0.75)).collect();
        let v = fit_value(&cfg, &data).unwrap();
        for o in &obs {
            assert!((v.predict(o) - 0.75).abs() < 1e-6, "got {}", v.predict(o));
        }
    }

    #[test]
    fn distinct_observations_fit_exactly() {
        let cfg = ValueFeatureConfig { dim: 32, salt: 7 };
        let (_, obs) = observations();
        let targets = [0.1, 0.9, 0.4];
        let data: Vec<(&Observation, f64)> = obs.iter().zip(targets).collect();
        let v = fit_value(&cfg, &data).unwrap();
        for (o, y) in obs.iter().zip(targets) {
            assert!((v.predict(o) - y).abs() < 1e-6, "{} vs {y}", v.predict(o));
        }
    }

    #[test]
    fn single_sample_uses_ridge_and_stays_finite() {
        let cfg = ValueFeatureConfig { dim: 32, salt: 7 };
        let (_, obs) = observations();
        let data = vec![(&obs[0], 1.0)];
        let v = fit_value(&cfg, &data).unwrap();
        assert!(v.ridge_used);
        assert!((v.predict(&obs[0]) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        let cfg = ValueFeatureConfig::default();
        assert!(matches!(fit_value(&cfg, &[]), Err(TrainError::EmptyDataset)));
        let (_, obs) = observations();
        let data = vec![(&obs[0], f64::NAN)];
        assert!(matches!(fit_value(&cfg, &data), Err(TrainError::ValueFit { .. })));
    }
}

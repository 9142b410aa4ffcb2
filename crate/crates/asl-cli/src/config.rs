//! JSON schemas the CLI owns: the train config and the perturbation
//! selection file. Unknown keys are rejected so hyperparameter typos fail
//! loudly instead of silently training with defaults.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use asl_core::env::PerturbationKind;
use asl_core::policy::FeatureConfig;
use asl_core::see::{EmbedConfig, WorldModelSpec};
use asl_core::train::{RlConfig, SupervisedAlgorithm, SupervisedConfig, ValueFeatureConfig};

use crate::CliError;

/// One schema covers supervised and reinforcement runs; `plan` sorts out
/// which fields apply and rejects the ones that do not. Optional fields are
/// skipped when absent so the manifest digest tracks exactly the fields the
/// author wrote.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub algorithm: String,
    pub learning_rate: f64,
    pub seed: u64,
    /// Scenario files or directories of scenario files.
    pub scenarios: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_expectation: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rollouts_per_task: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor_epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_config: Option<FeatureConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_config: Option<ValueFeatureConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world_model: Option<WorldModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbedConfig>,
    /// Checkpoint warm-starting a reinforcement run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_params: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

/// The branch a train config resolves to.
pub enum TrainPlan {
    Supervised(SupervisedConfig),
    Rl(RlConfig),
}

impl TrainConfig {
    pub fn plan(&self) -> Result<TrainPlan, CliError> {
        match self.algorithm.as_str() {
            "sft" | "asl" => self.supervised_plan(),
            "filtered_bc" | "filtered_bc_see" | "digirl" | "digirl_see" => self.rl_plan(),
            other => Err(CliError::Config(format!(
                "unknown algorithm '{other}'; expected one of sft, asl, filtered_bc, \
                 filtered_bc_see, digirl, digirl_see"
            ))),
        }
    }

    fn supervised_plan(&self) -> Result<TrainPlan, CliError> {
        self.forbid(&[
            ("iterations", self.iterations.is_some()),
            ("rollouts_per_task", self.rollouts_per_task.is_some()),
            ("actor_epochs", self.actor_epochs.is_some()),
            ("tau", self.tau.is_some()),
            ("beta", self.beta.is_some()),
            ("eta", self.eta.is_some()),
            ("value_config", self.value_config.is_some()),
            ("init_params", self.init_params.is_some()),
        ])?;
        let algorithm = match self.algorithm.as_str() {
            "sft" => SupervisedAlgorithm::Sft,
            _ => SupervisedAlgorithm::Asl,
        };
        let epochs = self.require("epochs", self.epochs)?;
        Ok(TrainPlan::Supervised(SupervisedConfig {
            algorithm,
            learning_rate: self.learning_rate,
            epochs,
            seed: self.seed,
            feature_config: self.feature_config.unwrap_or_default(),
            exact_expectation: self.exact_expectation.unwrap_or(false),
        }))
    }

    /// Builds the RL config by round-tripping through its serde form so the
    /// library's own field defaults (actor epochs, tau, beta, eta) apply to
    /// whatever this config leaves unset.
    fn rl_plan(&self) -> Result<TrainPlan, CliError> {
        self.forbid(&[
            ("epochs", self.epochs.is_some()),
            ("exact_expectation", self.exact_expectation.is_some()),
        ])?;
        let mut doc = serde_json::Map::new();
        let mut put = |key: &str, value: serde_json::Value| {
            doc.insert(key.to_string(), value);
        };
        put("algorithm", serde_json::Value::String(self.algorithm.clone()));
        put("learning_rate", self.learning_rate.into());
        put("iterations", self.require("iterations", self.iterations)?.into());
        put("rollouts_per_task", self.require("rollouts_per_task", self.rollouts_per_task)?.into());
        put("seed", self.seed.into());
        if let Some(v) = self.actor_epochs {
            put("actor_epochs", v.into());
        }
        if let Some(v) = self.tau {
            put("tau", v.into());
        }
        if let Some(v) = self.beta {
            put("beta", v.into());
        }
        if let Some(v) = self.eta {
            put("eta", v.into());
        }
        if let Some(v) = self.feature_config {
            put("feature_config", serde_json::to_value(v).expect("feature config serializes"));
        }
        if let Some(v) = self.value_config {
            put("value_config", serde_json::to_value(v).expect("value config serializes"));
        }
        let cfg: RlConfig = serde_json::from_value(serde_json::Value::Object(doc))
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(TrainPlan::Rl(cfg))
    }

    fn require<T>(&self, name: &str, value: Option<T>) -> Result<T, CliError> {
        value.ok_or_else(|| {
            CliError::Config(format!("algorithm '{}' requires '{name}'", self.algorithm))
        })
    }

    fn forbid(&self, fields: &[(&str, bool)]) -> Result<(), CliError> {
        for (name, set) in fields {
            if *set {
                return Err(CliError::Config(format!(
                    "'{name}' does not apply to algorithm '{}'",
                    self.algorithm
                )));
            }
        }
        Ok(())
    }
}

/// Perturbation selection for eval and compare.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbFile {
    pub kinds: Vec<String>,
}

impl PerturbFile {
    pub fn parsed_kinds(&self) -> Result<Vec<PerturbationKind>, CliError> {
        if self.kinds.is_empty() {
            return Err(CliError::Config("perturbation file lists no kinds".to_string()));
        }
        self.kinds
            .iter()
            .map(|k| k.parse::<PerturbationKind>().map_err(|e| CliError::Config(e.to_string())))
            .collect()
    }
}

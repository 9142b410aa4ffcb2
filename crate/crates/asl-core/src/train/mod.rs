//! Training: dataset annotation, supervised objectives, value regression,
//! and RL fine-tuning.

mod data;
mod rl;
mod supervised;
mod value;

pub use data::{annotate_dataset, StepSample};
pub use rl::{
    advantage, augmented_reward, collect_trajectories, digirl_loss_and_grad,
    filtered_bc_loss_and_grad, monte_carlo_returns, rl_train, FbcVariant, RlAlgorithm,
    RlConfig, TrajStep, Trajectory,
};
pub use supervised::{
    asl_loss_and_grad, asl_loss_and_grad_exact, semantic_loss_and_grad,
    semantic_loss_and_grad_exact, sft_loss_and_grad, train_supervised, AslOutcome,
    SemanticOutcome, SupervisedAlgorithm, SupervisedConfig,
};
pub use value::{fit_value, value_features, ValueFeatureConfig, ValueFn};

use crate::env::EnvError;
use crate::policy::PolicyError;
use crate::see::SeeError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("task {task} step {step}: ground-truth action {action} is not available")]
    GroundTruthMissing { task: String, step: usize, action: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("bad config: {what}")]
    BadConfig { what: String },
    #[error("non-finite loss at epoch {epoch}: {what}")]
    Divergence { epoch: usize, what: String },
    #[error("dataset references unknown scenario {name}")]
    UnknownScenario { name: String },
    #[error("value regression failed: {msg}")]
    ValueFit { msg: String },
    #[error("step index {index} out of range for trajectory of length {len}")]
    StepIndex { index: usize, len: usize },
    #[error("recorded action {action} is not enumerable in its observation")]
    StepActionMissing { action: String },
    #[error("filtered cloning fed a step from a failed trajectory (goal {task})")]
    FailedTrajectoryStep { task: String },
    #[error("policy evaluation failed: {msg}")]
    Eval { msg: String },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    See(#[from] SeeError),
}

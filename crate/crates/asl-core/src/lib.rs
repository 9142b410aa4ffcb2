//! Desk-scale laboratory for studying how UI agents learn the *meaning* of
//! actions rather than their surface form.
//!
//! The crate simulates small app-like environments (screens, buttons, text
//! fields, toggles) where every action has an exact, enumerable effect. On top
//! of that it provides:
//!
//! - a featurized softmax policy with analytically checked gradients,
//! - a semantic effect estimator that scores a predicted action against a
//!   reference action by comparing the UI transitions they induce,
//! - supervised training (behavior cloning and its semantically augmented
//!   variant) and reinforcement-style training (advantage-filtered cloning
//!   with optional semantic reward shaping),
//! - evaluation utilities that measure robustness under scripted UI
//!   perturbations (reordered listings, renamed controls, removed duplicates,
//!   inserted distractors).
//!
//! Everything is deterministic given a seed: RNG streams are derived per
//! sample index, parallel sections merge results in input order, and all
//! emitted CSV/JSON artifacts are byte-stable across runs and worker counts.

#![forbid(unsafe_code)]

pub mod env;
pub mod evaluate;
pub mod hashing;
pub mod par;
pub mod policy;
pub mod report;
pub mod rngs;
pub mod runlog;
pub mod see;
pub mod train;

//! Policy persistence and behavior contracts across process boundaries.

mod common;

use asl_core::evaluate::{eval_tsr, EvalMode};
use asl_core::policy::{load_policy, save_policy, FeatureConfig, PolicyError};

#[test]
fn checkpoint_round_trip_preserves_behavior_exactly() {
    let suite = common::mixed_suite(910);
    let params =
        common::random_params(FeatureConfig { dim: 256, ngram: 3, salt: 77 }, 31);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("policy.json");
    save_policy(&path, &params).unwrap();
    let loaded = load_policy(&path).unwrap();
    assert_eq!(loaded, params);

    let before = eval_tsr(&suite, &params, EvalMode::Sampled { seed: 5 }, 1).unwrap();
    let after = eval_tsr(&suite, &loaded, EvalMode::Sampled { seed: 5 }, 1).unwrap();
    assert_eq!(before.tsr, after.tsr);
    for (a, b) in before.outcomes.iter().zip(&after.outcomes) {
        assert_eq!(a.success, b.success);
        assert_eq!(a.steps, b.steps);
    }
}

#[test]
fn corrupted_checkpoints_are_rejected_with_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{\"format\": \"asl-policy\"").unwrap();
    match load_policy(&path) {
        Err(PolicyError::Corrupt { path: p, .. }) => {
            assert!(p.contains("broken.json"));
        }
        other => panic!("expected corrupt error, got {other:?}"),
    }

    let missing = dir.path().join("absent.json");
    assert!(matches!(load_policy(&missing), Err(PolicyError::Io { .. })));
}

#[test]
fn weight_width_must_match_feature_dim_after_manual_edits() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("policy.json");
    let params = common::random_params(FeatureConfig { dim: 16, ngram: 3, salt: 1 }, 3);
    save_policy(&path, &params).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let tampered = text.replace("\"dim\": 16", "\"dim\": 32");
    std::fs::write(&path, tampered).unwrap();
    assert!(load_policy(&path).is_err());
}

//! Policy checkpoints as versioned JSON files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::softmax::PolicyParams;
use super::PolicyError;

const FORMAT: &str = "asl-policy";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    params: PolicyParams,
}

/// Writes `params` to `path` as pretty JSON with a trailing newline.
pub fn save_policy(path: &Path, params: &PolicyParams) -> Result<(), PolicyError> {
    params.validate()?;
    let file = CheckpointFile {
        format: FORMAT.to_string(),
        version: VERSION,
        params: params.clone(),
    };
    let mut body = serde_json::to_string_pretty(&file).expect("checkpoint serializes");
    body.push('\n');
    fs::write(path, body).map_err(|e| PolicyError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

/// Reads a checkpoint back; rejects unknown formats and future versions.
pub fn load_policy(path: &Path) -> Result<PolicyParams, PolicyError> {
    let body = fs::read_to_string(path).map_err(|e| PolicyError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    let file: CheckpointFile =
        serde_json::from_str(&body).map_err(|e| PolicyError::Corrupt {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
    if file.format != FORMAT {
        return Err(PolicyError::Corrupt {
            path: path.display().to_string(),
            msg: format!("unknown format {:?}", file.format),
        });
    }
    if file.version != VERSION {
        return Err(PolicyError::Corrupt {
            path: path.display().to_string(),
            msg: format!("unsupported version {}", file.version),
        });
    }
    file.params.validate()?;
    Ok(file.params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::FeatureConfig;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let mut params = PolicyParams::zeros(FeatureConfig { dim: 8, ngram: 3, salt: 1 });
        params.weights[0] = 0.1 + 0.2;
        params.weights[3] = -1.5e-13;
        params.weights[7] = f64::MIN_POSITIVE;
        save_policy(&path, &params).unwrap();
        let loaded = load_policy(&path).unwrap();
        assert_eq!(loaded, params);
        for (a, b) in loaded.weights.iter().zip(&params.weights) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_foreign_and_future_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");

        std::fs::write(&path, "{\"format\":\"other\"}").unwrap();
        assert!(matches!(load_policy(&path), Err(PolicyError::Corrupt { .. })));

        let params = PolicyParams::zeros(FeatureConfig { dim: 2, ngram: 3, salt: 0 });
        let body = serde_json::json!({
            "format": "asl-policy",
            "version": 99,
            "feature_config": params.feature_config,
            "weights": params.weights,
        });
        std::fs::write(&path, serde_json::to_string(&body).unwrap()).unwrap();
        assert!(matches!(load_policy(&path), Err(PolicyError::Corrupt { .. })));
    }

    #[test]
    fn missing_file_reports_path() {
        let err = load_policy(Path::new("/nonexistent/p.json")).unwrap_err();
        match err {
            PolicyError::Io { path, .. } => assert!(path.contains("nonexistent")),
            other => panic!("unexpected: {other:?}"),
        }
    }
}

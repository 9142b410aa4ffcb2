//! Tabular run logs with fixed numeric formatting, plus the manifest that
//! fingerprints a run's configuration.
//!
//! Output byte-identity across runs and thread counts is a contract: floats
//! are always printed with 9 significant digits, row order is the insertion
//! order, and manifests take their timestamp from SOURCE_DATE_EPOCH (default
//! 0) instead of the wall clock.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// One table value.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

/// 9 significant digits, scientific notation; the only float rendering used
/// in CSV output.
#[must_use]
pub fn fmt_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

impl Cell {
    #[must_use]
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_sig9(*v),
            Cell::Text(v) => v.clone(),
        }
    }
}

/// An append-only table with a mandatory header row.
#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl RunLog {
    #[must_use]
    pub fn new(columns: &[&str]) -> Self {
        RunLog {
            columns: columns.iter().map(|c| (*c).to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row arity mismatch");
        self.rows.push(row);
    }

    /// Renders the table as CSV text, header first, `\n` line endings.
    #[must_use]
    pub fn to_csv_string(&self) -> String {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(&self.columns).expect("header");
        for row in &self.rows {
            let rendered: Vec<String> = row.iter().map(Cell::render).collect();
            writer.write_record(&rendered).expect("row");
        }
        String::from_utf8(writer.into_inner().expect("flush")).expect("utf8")
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), std::io::Error> {
        fs::write(path, self.to_csv_string())
    }
}

/// Fingerprint and provenance of one run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub config_digest: String,
    pub code_version: String,
    pub created_unix: u64,
}

/// SHA-256 hex digest of the configuration's canonical JSON form (struct
/// field order as declared; maps must be ordered before reaching here).
pub fn config_digest<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Builds a manifest with an explicit timestamp.
pub fn manifest_with<T: Serialize>(config: &T, created_unix: u64) -> Manifest {
    Manifest {
        config_digest: config_digest(config),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix,
    }
}

/// Builds a manifest; the timestamp comes from SOURCE_DATE_EPOCH so repeated
/// runs of one configuration serialize identically (0 when unset).
pub fn manifest_for<T: Serialize>(config: &T) -> Manifest {
    let created_unix = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0);
    manifest_with(config, created_unix)
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<(), std::io::Error> {
    let mut body = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    body.push('\n');
    fs::write(path, body)
}

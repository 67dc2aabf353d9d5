//! Serializable estimate reports.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A scalar estimate with its tuning parameters, seed, and diagnostics.
/// Reports are reproducible from (config, seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub schema: u32,
    pub estimator: String,
    pub estimate: f64,
    pub units: String,
    #[serde(default)]
    pub tuning: serde_json::Value,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub replicate: Option<u64>,
    #[serde(default)]
    pub diagnostics: serde_json::Value,
}

impl EstimateReport {
    pub fn new(estimator: &str, estimate: f64, units: &str) -> Self {
        EstimateReport {
            schema: 1,
            estimator: estimator.to_string(),
            estimate,
            units: units.to_string(),
            tuning: serde_json::Value::Null,
            seed: 0,
            replicate: None,
            diagnostics: serde_json::Value::Null,
        }
    }

    pub fn with_tuning(mut self, tuning: serde_json::Value) -> Self {
        self.tuning = tuning;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_replicate(mut self, replicate: u64) -> Self {
        self.replicate = Some(replicate);
        self
    }

    pub fn with_diagnostics(mut self, diagnostics: serde_json::Value) -> Self {
        self.diagnostics = diagnostics;
        self
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

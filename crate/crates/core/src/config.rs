//! Evaluation parameters shared by every metric.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Thresholds, depth caps, sample counts and seeds governing an evaluation
/// run. Unknown keys are rejected when deserializing so that a typo in a
/// config file cannot silently fall back to a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Distance threshold `t` for precision, recall, F-score and IoU.
    pub fscore_threshold_m: f64,
    pub min_depth_m: f64,
    pub max_depth_m: f64,
    /// Cutoffs for the ratio accuracy `max(y/y*, y*/y) < cutoff`.
    pub delta_thresholds: Vec<f64>,
    /// Points drawn from each cloud before solving the assignment problem.
    pub emd_sample_count: usize,
    pub rng_seed: u64,
    /// Per-direction means when true, raw sums otherwise.
    pub chamfer_normalized: bool,
    /// Stored 16-bit PNG value divided by this gives meters.
    pub png_depth_scale: u32,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            fscore_threshold_m: 0.01,
            min_depth_m: 0.001,
            max_depth_m: 10.0,
            delta_thresholds: vec![1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25],
            emd_sample_count: 2048,
            rng_seed: 0,
            chamfer_normalized: true,
            png_depth_scale: 1000,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.min_depth_m > 0.0 && self.min_depth_m < self.max_depth_m)
            || !self.max_depth_m.is_finite()
        {
            return bad(format!(
                "depth range must satisfy 0 < min_depth_m < max_depth_m, got ({}, {})",
                self.min_depth_m, self.max_depth_m
            ));
        }
        if !(self.fscore_threshold_m > 0.0 && self.fscore_threshold_m.is_finite()) {
            return bad(format!(
                "fscore_threshold_m must be positive, got {}",
                self.fscore_threshold_m
            ));
        }
        if self.emd_sample_count < 2 {
            return bad(format!(
                "emd_sample_count must be at least 2, got {}",
                self.emd_sample_count
            ));
        }
        if self.png_depth_scale == 0 {
            return bad("png_depth_scale must be non-zero".into());
        }
        if self.delta_thresholds.is_empty() {
            return bad("delta_thresholds must not be empty".into());
        }
        let mut prev = 1.0;
        for &d in &self.delta_thresholds {
            if d <= prev || !d.is_finite() {
                return bad(format!(
                    "delta_thresholds must be finite, > 1 and strictly increasing, got {:?}",
                    self.delta_thresholds
                ));
            }
            prev = d;
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding. Identical configs always
    /// produce identical digests because the field order is fixed.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Parses a JSON config, filling absent fields from the defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: EvalConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }
}

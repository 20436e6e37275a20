//! Log-space z-score normalization of variances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Offset added before taking logs so zero variances stay finite.
pub const LOG_OFFSET: f64 = 1e-12;

/// `z = (ln(s2 + δ) - mean) / std`, with statistics from training data only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceScaler {
    pub mean: f64,
    pub std: f64,
}

impl VarianceScaler {
    pub fn fit(train_variances: &[f64]) -> Result<Self> {
        if train_variances.is_empty() {
            return Err(Error::invalid("cannot fit a scaler on an empty training set"));
        }
        if train_variances.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("training variances must be finite and >= 0"));
        }
        let logs: Vec<f64> = train_variances.iter().map(|v| (v + LOG_OFFSET).ln()).collect();
        let n = logs.len() as f64;
        let mean = logs.iter().sum::<f64>() / n;
        let std = (logs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
        if !(std > 1e-12) {
            return Err(Error::data("training variances have zero spread; cannot normalize"));
        }
        Ok(Self { mean, std })
    }

    pub fn transform(&self, variance: f64) -> f64 {
        ((variance + LOG_OFFSET).ln() - self.mean) / self.std
    }

    /// Back to variance units, clamped at zero.
    pub fn inverse(&self, z: f64) -> f64 {
        ((z * self.std + self.mean).exp() - LOG_OFFSET).max(0.0)
    }

    pub fn transform_all(&self, variances: &[f64]) -> Vec<f64> {
        variances.iter().map(|&v| self.transform(v)).collect()
    }
}

/// Fits the scaler on training variances and returns it; apply
/// [`VarianceScaler::transform`] / [`VarianceScaler::inverse`] to any split.
pub fn normalize_targets(train_variances: &[f64]) -> Result<VarianceScaler> {
    VarianceScaler::fit(train_variances)
}

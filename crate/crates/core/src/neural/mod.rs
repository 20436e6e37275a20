//! Recurrent variance forecaster: a stacked LSTM trained by BPTT with AdamW
//! under the hybrid loss `λ·MSE(truth, pred) + (1-λ)·MSE(garch, pred)`.
//!
//! Everything runs in a normalized space (z-scored log variance, see
//! [`VarianceScaler`]); [`GinnModel`] bundles a network with its scaler and
//! maps predictions back to variance units.

mod adamw;
mod loss;
mod model;
mod network;
mod scaler;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adamw::{adamw_step, AdamWConfig, OptimizerState};
pub use loss::{ginn_loss, ginn_loss_grad, mse};
pub use model::{GinnModel, ModelKind};
pub use network::{DropoutMasks, ForwardPass, LstmNetwork, Mode, ParamGrads, Tape};
pub use scaler::{normalize_targets, VarianceScaler, LOG_OFFSET};
pub use train::{train, TrainConfig, TrainOutcome, TrainingSample, DEFAULT_EPOCHS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub num_lstm_layers: usize,
    pub hidden_width: usize,
    pub dropout_rate: f64,
    pub input_window: usize,
    /// Batch-norm running-statistics momentum.
    pub bn_momentum: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            num_lstm_layers: 3,
            hidden_width: 256,
            dropout_rate: 0.2,
            input_window: crate::market_data::DEFAULT_WINDOW,
            bn_momentum: 0.1,
        }
    }
}

impl NetworkConfig {
    /// Default layout at test width 32.
    pub fn desk() -> Self {
        Self {
            hidden_width: 32,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_lstm_layers == 0 || self.hidden_width == 0 || self.input_window == 0 {
            return Err(Error::invalid("layer count, hidden width and input window must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.bn_momentum) {
            return Err(Error::invalid(format!(
                "batch-norm momentum must be in [0, 1], got {}",
                self.bn_momentum
            )));
        }
        Ok(())
    }
}

/// Weight on the ground-truth term of the hybrid loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    lambda: f64,
}

impl LossSpec {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::invalid(format!("lambda must be in [0, 1], got {lambda}")));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(NetworkConfig::default().validate().is_ok());
        assert_eq!(NetworkConfig::default().num_lstm_layers, 3);
        assert_eq!(NetworkConfig::default().hidden_width, 256);
        assert_eq!(NetworkConfig::desk().hidden_width, 32);
        let bad = NetworkConfig {
            dropout_rate: 1.0,
            ..NetworkConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = NetworkConfig {
            hidden_width: 0,
            ..NetworkConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn lambda_range() {
        assert!(LossSpec::new(0.0).is_ok());
        assert!(LossSpec::new(1.0).is_ok());
        assert!(LossSpec::new(-0.01).is_err());
        assert!(LossSpec::new(1.01).is_err());
        assert!(LossSpec::new(f64::NAN).is_err());
    }
}

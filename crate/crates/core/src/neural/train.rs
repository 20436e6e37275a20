//! Mini-batch BPTT training.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::adamw::{adamw_step, AdamWConfig, OptimizerState};
use super::loss::{ginn_loss, ginn_loss_grad};
use super::network::{LstmNetwork, Mode};
use super::{LossSpec, NetworkConfig};
use crate::error::{Error, Result};

pub const DEFAULT_EPOCHS: usize = 300;

/// One training example in normalized units.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    /// The previous `input_window` ground-truth variances.
    pub window: Vec<f64>,
    pub truth: f64,
    pub garch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub network: NetworkConfig,
    pub optimizer: AdamWConfig,
    pub loss: LossSpec,
    pub epochs: usize,
    pub batch_size: usize,
    /// Fixes initialization, shuffling and dropout.
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(network: NetworkConfig, loss: LossSpec, epochs: usize, seed: u64) -> Self {
        Self {
            network,
            optimizer: AdamWConfig::default(),
            loss,
            epochs,
            batch_size: 64,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.optimizer.validate()?;
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size < 2 {
            return Err(Error::invalid("batch size must be at least 2 for batch norm"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Trained network, left in eval mode.
    pub network: LstmNetwork,
    /// Mean training loss per epoch.
    pub loss_curve: Vec<f64>,
}

/// Trains a freshly initialized network. Mini-batches are reshuffled each
/// epoch; a trailing batch with fewer than two samples is skipped.
pub fn train(samples: &[TrainingSample], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let window = config.network.input_window;
    if samples.len() < 2 {
        return Err(Error::data(format!("need at least 2 training samples, got {}", samples.len())));
    }
    for (i, s) in samples.iter().enumerate() {
        if s.window.len() != window {
            return Err(Error::invalid(format!(
                "sample {i} has a window of {} values, expected {window}",
                s.window.len()
            )));
        }
        if !(s.truth.is_finite() && s.garch.is_finite()) || s.window.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("sample {i} contains non-finite values")));
        }
    }

    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut net = LstmNetwork::new(config.network.clone(), &mut rng)?;
    net.set_mode(Mode::Train);
    let mut opt = OptimizerState::new(config.optimizer, net.params());
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut count = 0usize;
        for chunk in order.chunks(config.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let mut x = Array2::zeros((chunk.len(), window));
            for (r, &i) in chunk.iter().enumerate() {
                x.row_mut(r).iter_mut().zip(&samples[i].window).for_each(|(d, s)| *d = *s);
            }
            let truth: Vec<f64> = chunk.iter().map(|&i| samples[i].truth).collect();
            let garch: Vec<f64> = chunk.iter().map(|&i| samples[i].garch).collect();

            let pass = net.forward(x.view(), &mut rng)?;
            let loss = ginn_loss(&truth, &garch, &pass.outputs, config.loss)?;
            if !loss.is_finite() {
                return Err(non_finite(epoch, &curve));
            }
            let upstream = ginn_loss_grad(&truth, &garch, &pass.outputs, config.loss)?;
            let grads = net.backward(&pass, &upstream)?;
            net.commit_batch_stats(&pass);
            adamw_step(net.params_mut(), &grads, &mut opt)?;
            total += loss * chunk.len() as f64;
            count += chunk.len();
        }
        let epoch_loss = total / count as f64;
        if !epoch_loss.is_finite() || !net.is_finite() {
            return Err(non_finite(epoch, &curve));
        }
        log::debug!("epoch {} loss {epoch_loss:.6}", epoch + 1);
        curve.push(epoch_loss);
    }
    net.set_mode(Mode::Eval);
    Ok(TrainOutcome { network: net, loss_curve: curve })
}

fn non_finite(epoch: usize, curve: &[f64]) -> Error {
    match curve.last() {
        Some(last) => Error::numerical(format!(
            "non-finite loss in epoch {}; last finite epoch {} had loss {last}",
            epoch + 1,
            curve.len()
        )),
        None => Error::numerical(format!("non-finite loss in epoch {}; no epoch completed", epoch + 1)),
    }
}

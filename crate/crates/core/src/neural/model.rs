//! A trained network bundled with its scaler, and its checkpoint format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::network::{LstmNetwork, Mode};
use super::scaler::VarianceScaler;
use crate::error::{Error, Result};
use crate::series::VarianceSeries;

/// Neural forecaster flavours, distinguished by the loss weight λ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Ground truth only (λ = 1).
    Lstm,
    /// Hybrid loss with a user-chosen λ.
    Ginn,
    /// GARCH targets only (λ = 0).
    Ginn0,
}

impl ModelKind {
    pub const DEFAULT_GINN_LAMBDA: f64 = 0.01;

    /// λ forced by the kind, or `requested` for [`ModelKind::Ginn`].
    pub fn lambda(self, requested: f64) -> f64 {
        match self {
            ModelKind::Lstm => 1.0,
            ModelKind::Ginn => requested,
            ModelKind::Ginn0 => 0.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Ginn => "ginn",
            ModelKind::Ginn0 => "ginn0",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lstm" => Ok(ModelKind::Lstm),
            "ginn" => Ok(ModelKind::Ginn),
            "ginn0" | "ginn-0" => Ok(ModelKind::Ginn0),
            other => Err(Error::invalid(format!("unknown neural model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GinnModel {
    pub kind: ModelKind,
    pub lambda: f64,
    pub seed: u64,
    pub epochs: usize,
    pub scaler: VarianceScaler,
    pub network: LstmNetwork,
}

impl GinnModel {
    pub fn input_window(&self) -> usize {
        self.network.config().input_window
    }

    /// Next-day variance from the previous `input_window` variances.
    pub fn predict_variance(&self, window: &[f64]) -> Result<f64> {
        let z: Vec<f64> = self.scaler.transform_all(window);
        Ok(self.scaler.inverse(self.network.predict(&z)?))
    }

    /// One prediction per day after the first `input_window` days of
    /// `history`, each from the preceding `input_window` values.
    pub fn rolling_predict(&self, history: &VarianceSeries) -> Result<VarianceSeries> {
        let w = self.input_window();
        if history.len() <= w {
            return Err(Error::data(format!(
                "history of {} days is too short for a {w}-day window",
                history.len()
            )));
        }
        let z = self.scaler.transform_all(history.values());
        let n = history.len() - w;
        let mut out = Vec::with_capacity(n);
        const CHUNK: usize = 256;
        for start in (0..n).step_by(CHUNK) {
            let end = (start + CHUNK).min(n);
            let mut batch = Array2::zeros((end - start, w));
            for (r, t) in (start..end).enumerate() {
                batch.row_mut(r).iter_mut().zip(&z[t..t + w]).for_each(|(d, s)| *d = *s);
            }
            let preds = self.network.predict_batch(ArrayView2::from(&batch))?;
            out.extend(preds.into_iter().map(|p| self.scaler.inverse(p)));
        }
        VarianceSeries::new(history.dates()[w..].to_vec(), out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Loads a checkpoint and checks that its input window is `input_window`.
    pub fn load(path: impl AsRef<Path>, input_window: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut model: GinnModel = serde_json::from_str(&text)?;
        if model.input_window() != input_window {
            return Err(Error::invalid(format!(
                "checkpoint {} expects a {}-day input window, but {input_window} was requested",
                path.display(),
                model.input_window()
            )));
        }
        model.network.validate_layout()?;
        model.network.set_mode(Mode::Eval);
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::neural::NetworkConfig;
    use crate::series::epoch_day;

    fn model(window: usize) -> GinnModel {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = NetworkConfig {
            num_lstm_layers: 2,
            hidden_width: 6,
            input_window: window,
            ..NetworkConfig::default()
        };
        let mut network = LstmNetwork::new(cfg, &mut rng).unwrap();
        network.set_mode(Mode::Eval);
        GinnModel {
            kind: ModelKind::Ginn,
            lambda: 0.01,
            seed: 1,
            epochs: 0,
            scaler: VarianceScaler { mean: -9.0, std: 1.3 },
            network,
        }
    }

    fn history(n: usize) -> VarianceSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        VarianceSeries::new((0..n).map(epoch_day).collect(), (0..n).map(|_| rng.random_range(0.0..4e-4)).collect()).unwrap()
    }

    #[test]
    fn rolling_predict_counts_and_matches_manual_composition() {
        let m = model(12);
        let h = history(300);
        let out = m.rolling_predict(&h).unwrap();
        assert_eq!(out.len(), 300 - 12);
        assert!(out.values().iter().all(|&v| v >= 0.0));
        assert_eq!(out.first_date(), Some(h.dates()[12]));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let t = rng.random_range(12..300);
            let z: Vec<f64> = h.values()[t - 12..t].iter().map(|&v| m.scaler.transform(v)).collect();
            let manual = m.scaler.inverse(m.network.predict(&z).unwrap());
            assert_eq!(out.get(h.dates()[t]).unwrap().to_bits(), manual.to_bits());
        }
        assert!(m.rolling_predict(&history(12)).is_err());
    }

    #[test]
    fn checkpoint_round_trip_and_window_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = model(8);
        m.save(&path).unwrap();
        let back = GinnModel::load(&path, 8).unwrap();
        assert_eq!(back, m);
        assert!(GinnModel::load(&path, 9).is_err());
        assert!(GinnModel::load(dir.path().join("missing.json"), 8).is_err());
    }

    #[test]
    fn kinds() {
        assert_eq!(ModelKind::Lstm.lambda(0.3), 1.0);
        assert_eq!(ModelKind::Ginn0.lambda(0.3), 0.0);
        assert_eq!(ModelKind::Ginn.lambda(0.3), 0.3);
        assert_eq!("GINN0".parse::<ModelKind>().unwrap(), ModelKind::Ginn0);
        assert!("garch".parse::<ModelKind>().is_err());
    }
}

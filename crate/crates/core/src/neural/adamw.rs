//! AdamW with decoupled weight decay.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub epsilon: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            weight_decay: 1e-2,
            epsilon: 1e-8,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.weight_decay >= 0.0
            && self.weight_decay.is_finite()
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid AdamW settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamWConfig,
    pub step: u64,
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
}

impl OptimizerState {
    /// Zero moments shaped like `params`.
    pub fn new(config: AdamWConfig, params: &[Array2<f64>]) -> Self {
        Self {
            config,
            step: 0,
            m: params.iter().map(|p| Array2::zeros(p.dim())).collect(),
            v: params.iter().map(|p| Array2::zeros(p.dim())).collect(),
        }
    }
}

/// One AdamW update applied in place:
/// `p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)`.
pub fn adamw_step(params: &mut [Array2<f64>], grads: &[Array2<f64>], state: &mut OptimizerState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::invalid("parameter, gradient and moment counts differ"));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        if p.dim() != g.dim() || p.dim() != m.dim() {
            return Err(Error::invalid(format!(
                "shape mismatch: parameter {:?}, gradient {:?}, moment {:?}",
                p.dim(),
                g.dim(),
                m.dim()
            )));
        }
    }
    let c = state.config;
    state.step += 1;
    let bc1 = 1.0 - c.beta1.powi(state.step as i32);
    let bc2 = 1.0 - c.beta2.powi(state.step as i32);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= c.learning_rate * (m_hat / (v_hat.sqrt() + c.epsilon) + c.weight_decay * *p);
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(wd: f64) -> AdamWConfig {
        AdamWConfig {
            weight_decay: wd,
            ..AdamWConfig::default()
        }
    }

    #[test]
    fn zero_gradient_zero_decay_is_identity() {
        let mut p = vec![Array2::from_elem((2, 3), 0.7)];
        let g = vec![Array2::zeros((2, 3))];
        let mut s = OptimizerState::new(cfg(0.0), &p);
        for _ in 0..5 {
            adamw_step(&mut p, &g, &mut s).unwrap();
        }
        assert!(p[0].iter().all(|&v| v == 0.7));
    }

    #[test]
    fn first_step_unit_gradient() {
        let mut p = vec![Array2::zeros((1, 1))];
        let g = vec![Array2::ones((1, 1))];
        let mut s = OptimizerState::new(cfg(0.0), &p);
        adamw_step(&mut p, &g, &mut s).unwrap();
        // m_hat = v_hat = 1, so the step is lr / (1 + eps)
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((p[0][[0, 0]] - expected).abs() < 1e-15);
        assert!((p[0][[0, 0]] + 9.9999999e-4).abs() < 1e-15);
    }

    #[test]
    fn decay_shrinks_geometrically() {
        let mut p = vec![Array2::from_elem((1, 2), 2.0)];
        let g = vec![Array2::zeros((1, 2))];
        let c = cfg(0.1);
        let mut s = OptimizerState::new(c, &p);
        for k in 1..=4 {
            adamw_step(&mut p, &g, &mut s).unwrap();
            let expected = 2.0 * (1.0 - c.learning_rate * c.weight_decay).powi(k);
            assert!((p[0][[0, 0]] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![Array2::zeros((2, 2))];
        let mut s = OptimizerState::new(AdamWConfig::default(), &p);
        assert!(adamw_step(&mut p, &[Array2::zeros((2, 3))], &mut s).is_err());
        assert!(adamw_step(&mut p, &[], &mut s).is_err());
    }
}

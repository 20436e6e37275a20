//! Seeded GARCH(1,1) return simulation with known conditional variances.
//!
//! Normal draws come from [`rand_distr::StandardNormal`] (ziggurat) fed by a
//! [`ChaCha20Rng`] seeded with `seed_from_u64`. Both are portable, so a seed
//! reproduces the same series on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::garch::unconditional_variance;
use crate::market_data::ReturnSeries;
use crate::series::{epoch_day, VarianceSeries};

pub const DEFAULT_BURN_IN: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub alpha0: f64,
    pub alpha: f64,
    pub beta: f64,
    pub length: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn new(alpha0: f64, alpha: f64, beta: f64, length: usize, seed: u64) -> Result<Self> {
        let spec = Self {
            alpha0,
            alpha,
            beta,
            length,
            burn_in: DEFAULT_BURN_IN,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0.is_finite() && self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(Error::invalid("simulation weights must be finite"));
        }
        if self.alpha0 <= 0.0 {
            return Err(Error::invalid(format!("alpha0 must be > 0, got {}", self.alpha0)));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::invalid("alpha and beta must be >= 0"));
        }
        if self.alpha + self.beta >= 1.0 {
            return Err(Error::invalid(format!(
                "alpha + beta = {} must be < 1",
                self.alpha + self.beta
            )));
        }
        if self.length == 0 {
            return Err(Error::invalid("simulation length must be at least 1"));
        }
        Ok(())
    }

    pub fn persistence(&self) -> f64 {
        self.alpha + self.beta
    }

    pub fn unconditional_variance(&self) -> f64 {
        self.alpha0 / (1.0 - self.alpha - self.beta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub spec: SimulationSpec,
    /// Shocks `e_t = s_t * z_t` (zero mean), on the epoch calendar.
    pub returns: ReturnSeries,
    /// Conditional variance `s_t^2` of each return.
    pub true_variance: VarianceSeries,
}

pub fn simulate_garch(spec: &SimulationSpec) -> Result<Simulation> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut h = unconditional_variance(spec.alpha0, spec.alpha, spec.beta)?;
    let total = spec.burn_in + spec.length;
    let mut returns = Vec::with_capacity(spec.length);
    let mut variances = Vec::with_capacity(spec.length);
    for t in 0..total {
        let z: f64 = StandardNormal.sample(&mut rng);
        let e = h.sqrt() * z;
        if t >= spec.burn_in {
            returns.push(e);
            variances.push(h);
        }
        h = spec.alpha0 + spec.alpha * e * e + spec.beta * h;
    }
    let dates: Vec<_> = (0..spec.length).map(epoch_day).collect();
    Ok(Simulation {
        spec: *spec,
        returns: ReturnSeries::new(dates.clone(), returns)?,
        true_variance: VarianceSeries::new(dates, variances)?,
    })
}

/// Cartesian grid over `alphas x betas` (alpha-major), with seeds
/// `seed_base, seed_base + 1, ...` in grid order. Each cell's intercept is
/// `1 - alpha - beta`, giving unit long-run variance.
pub fn persistence_grid(alphas: &[f64], betas: &[f64], length: usize, seed_base: u64) -> Result<Vec<SimulationSpec>> {
    let mut specs = Vec::with_capacity(alphas.len() * betas.len());
    for &a in alphas {
        for &b in betas {
            let seed = seed_base.wrapping_add(specs.len() as u64);
            // intercept chosen so every cell has unit long-run variance
            let spec = SimulationSpec::new(1.0 - a - b, a, b, length, seed)
                .map_err(|e| Error::invalid(format!("infeasible grid cell alpha={a} beta={b}: {e}")))?;
            specs.push(spec);
        }
    }
    Ok(specs)
}

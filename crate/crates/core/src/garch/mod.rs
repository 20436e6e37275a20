//! GARCH-family conditional variance models.
//!
//! Three (1,1)-order recursions are supported. With `e` the previous residual
//! and `I = 1` when `e < 0`:
//!
//! ```text
//! GARCH      s2_t = a0 + a*e^2 + b*s2_{t-1}
//! GJR-GARCH  s2_t = a0 + a*e^2 + g*e^2*I + b*s2_{t-1}
//! TGARCH     s_t  = a0 + a*|e| + g*|e|*I + b*s_{t-1}      (volatility units)
//! ```
//!
//! TGARCH runs in volatility units, so its intercept `a0` is a volatility and
//! not a variance; every variance it reports is the squared state.

mod fit;
mod rolling;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fit::{backcast_variance, fit_mle, fit_mle_with, FitOptions, GarchFit};
pub use rolling::{
    forecast_one_step, rolling_forecast, rolling_forecast_with, ResidualSource, RollingForecast,
    RollingOptions, WindowFailure, WindowFit,
};

/// Persistence at or above this value is "high".
pub const HIGH_PERSISTENCE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GarchVariant {
    #[serde(rename = "GARCH")]
    Garch,
    #[serde(rename = "GJR_GARCH")]
    GjrGarch,
    #[serde(rename = "TGARCH")]
    Tgarch,
}

impl GarchVariant {
    pub const ALL: [GarchVariant; 3] = [GarchVariant::Garch, GarchVariant::GjrGarch, GarchVariant::Tgarch];

    /// `true` for the variants with a leverage term.
    pub fn is_asymmetric(self) -> bool {
        !matches!(self, GarchVariant::Garch)
    }

    pub fn label(self) -> &'static str {
        match self {
            GarchVariant::Garch => "GARCH",
            GarchVariant::GjrGarch => "GJR_GARCH",
            GarchVariant::Tgarch => "TGARCH",
        }
    }
}

impl fmt::Display for GarchVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for GarchVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "garch" => Ok(GarchVariant::Garch),
            "gjr" | "gjrgarch" => Ok(GarchVariant::GjrGarch),
            "tgarch" => Ok(GarchVariant::Tgarch),
            other => Err(Error::invalid(format!("unknown GARCH variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub variant: GarchVariant,
    pub alpha0: f64,
    pub alpha: f64,
    /// Leverage weight; always 0 for plain GARCH.
    pub gamma: f64,
    pub beta: f64,
    /// Constant mean removed from the window before fitting.
    pub mean: f64,
}

impl GarchParams {
    /// Checks positivity constraints. Stationarity is not required here; see
    /// [`GarchParams::is_stationary`].
    pub fn new(variant: GarchVariant, alpha0: f64, alpha: f64, gamma: f64, beta: f64) -> Result<Self> {
        let p = Self {
            variant,
            alpha0,
            alpha,
            gamma,
            beta,
            mean: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn garch(alpha0: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(GarchVariant::Garch, alpha0, alpha, 0.0, beta)
    }

    pub fn with_mean(mut self, mean: f64) -> Self {
        self.mean = mean;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha0, self.alpha, self.gamma, self.beta, self.mean];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("GARCH parameters must be finite"));
        }
        if self.alpha0 <= 0.0 {
            return Err(Error::invalid(format!("alpha0 must be > 0, got {}", self.alpha0)));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::invalid(format!(
                "alpha and beta must be >= 0, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        match self.variant {
            GarchVariant::Garch if self.gamma != 0.0 => {
                Err(Error::invalid("plain GARCH has no leverage term (gamma must be 0)"))
            }
            GarchVariant::GjrGarch | GarchVariant::Tgarch if self.alpha + self.gamma < 0.0 => {
                Err(Error::invalid("alpha + gamma must be >= 0"))
            }
            _ => Ok(()),
        }
    }

    /// `alpha + gamma/2 + beta`; for plain GARCH this is `alpha + beta`.
    pub fn stationarity_sum(&self) -> f64 {
        self.alpha + 0.5 * self.gamma + self.beta
    }

    pub fn is_stationary(&self) -> bool {
        self.stationarity_sum() < 1.0
    }

    /// Advances the recursion state by one residual. The state is a variance
    /// for GARCH/GJR and a volatility for TGARCH.
    #[inline]
    fn step_state(&self, state: f64, eps: f64) -> f64 {
        let neg = if eps < 0.0 { 1.0 } else { 0.0 };
        match self.variant {
            GarchVariant::Garch => {
                let e2 = eps * eps;
                self.alpha0 + self.alpha * e2 + self.beta * state
            }
            GarchVariant::GjrGarch => {
                let e2 = eps * eps;
                self.alpha0 + self.alpha * e2 + self.gamma * e2 * neg + self.beta * state
            }
            GarchVariant::Tgarch => {
                let a = eps.abs();
                self.alpha0 + self.alpha * a + self.gamma * a * neg + self.beta * state
            }
        }
    }

    #[inline]
    fn state_from_variance(&self, variance: f64) -> f64 {
        match self.variant {
            GarchVariant::Tgarch => variance.sqrt(),
            _ => variance,
        }
    }

    #[inline]
    fn variance_from_state(&self, state: f64) -> f64 {
        match self.variant {
            GarchVariant::Tgarch => state * state,
            _ => state,
        }
    }

    /// Variance for the step after `prev_variance` given the residual `eps`.
    pub fn next_variance(&self, prev_variance: f64, eps: f64) -> f64 {
        self.variance_from_state(self.step_state(self.state_from_variance(prev_variance), eps))
    }
}

/// Conditional variances `s2_0 .. s2_{n-1}` for residuals `e_0 .. e_{n-1}`,
/// where `s2_0 = sigma0_sq` and each later entry applies the recursion to the
/// previous residual.
pub fn variance_path(params: &GarchParams, residuals: &[f64], sigma0_sq: f64) -> Result<Vec<f64>> {
    let mut path = extended_path(params, residuals, sigma0_sq)?;
    path.pop();
    Ok(path)
}

/// Like [`variance_path`] with one more entry: the variance after the final residual.
pub(crate) fn extended_path(params: &GarchParams, residuals: &[f64], sigma0_sq: f64) -> Result<Vec<f64>> {
    if !(sigma0_sq > 0.0 && sigma0_sq.is_finite()) {
        return Err(Error::invalid(format!("initial variance must be > 0, got {sigma0_sq}")));
    }
    if residuals.iter().any(|e| !e.is_finite()) {
        return Err(Error::invalid("residuals must be finite"));
    }
    let mut state = params.state_from_variance(sigma0_sq);
    let mut path = Vec::with_capacity(residuals.len() + 1);
    path.push(sigma0_sq);
    for &eps in residuals {
        state = params.step_state(state, eps);
        path.push(params.variance_from_state(state));
    }
    Ok(path)
}

/// Gaussian log-likelihood of the residuals under the variance path started at `sigma0_sq`.
pub fn log_likelihood(params: &GarchParams, residuals: &[f64], sigma0_sq: f64) -> Result<f64> {
    let path = variance_path(params, residuals, sigma0_sq)?;
    let half_ln_2pi = 0.5 * (2.0 * PI).ln();
    let mut ll = 0.0;
    for (t, (&e, &s2)) in residuals.iter().zip(&path).enumerate() {
        if !(s2 > 0.0 && s2.is_finite()) {
            return Err(Error::numerical(format!("variance {s2} at step {t} is not positive")));
        }
        ll += -half_ln_2pi - 0.5 * s2.ln() - e * e / (2.0 * s2);
    }
    Ok(ll)
}

/// `alpha + beta`, defined for plain GARCH only.
pub fn persistence(params: &GarchParams) -> Result<f64> {
    match params.variant {
        GarchVariant::Garch => Ok(params.alpha + params.beta),
        v => Err(Error::invalid(format!("persistence is defined for GARCH only, not {v}"))),
    }
}

/// Long-run variance `alpha0 / (1 - alpha - beta)` of a stationary GARCH(1,1).
pub fn unconditional_variance(alpha0: f64, alpha: f64, beta: f64) -> Result<f64> {
    let pi = alpha + beta;
    if !(pi < 1.0) {
        return Err(Error::invalid(format!("alpha + beta = {pi} is not < 1")));
    }
    Ok(alpha0 / (1.0 - pi))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn params(variant: GarchVariant, a0: f64, a: f64, g: f64, b: f64) -> GarchParams {
        GarchParams::new(variant, a0, a, g, b).unwrap()
    }

    #[test]
    fn collapsed_recursion_is_constant() {
        let eps = [0.3, -1.2, 0.0, 2.5, -0.1];
        for v in GarchVariant::ALL {
            let p = params(v, 0.4, 0.0, 0.0, 0.0);
            let path = variance_path(&p, &eps, 3.0).unwrap();
            assert_eq!(path[0], 3.0);
            let expect = if v == GarchVariant::Tgarch { 0.16 } else { 0.4 };
            for s2 in &path[1..] {
                assert!((s2 - expect).abs() < 1e-15, "{v}: {s2}");
            }
        }
    }

    #[test]
    fn one_step_by_hand() {
        let p = GarchParams::garch(0.1, 0.2, 0.7).unwrap();
        let path = extended_path(&p, &[1.0], 1.0).unwrap();
        assert!((path[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gjr_without_leverage_is_garch() {
        let eps = [0.5, -0.7, -1.1, 0.2, 0.0, -3.0];
        let g = variance_path(&params(GarchVariant::Garch, 0.1, 0.1, 0.0, 0.8), &eps, 0.9).unwrap();
        let j = variance_path(&params(GarchVariant::GjrGarch, 0.1, 0.1, 0.0, 0.8), &eps, 0.9).unwrap();
        assert_eq!(g, j);
    }

    #[test]
    fn leverage_only_bites_on_negative_shocks() {
        let gjr = params(GarchVariant::GjrGarch, 0.1, 0.1, 0.2, 0.7);
        assert_eq!(gjr.next_variance(1.0, 0.5), 0.1 + 0.1 * 0.25 + 0.7);
        assert!((gjr.next_variance(1.0, -0.5) - (0.1 + 0.3 * 0.25 + 0.7)).abs() < 1e-15);
        let t = params(GarchVariant::Tgarch, 0.1, 0.1, 0.2, 0.7);
        assert!((t.next_variance(1.0, -0.5) - (0.1f64 + 0.3 * 0.5 + 0.7).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_initial_variance_and_params() {
        let p = GarchParams::garch(0.1, 0.1, 0.8).unwrap();
        assert!(variance_path(&p, &[0.1], 0.0).is_err());
        assert!(variance_path(&p, &[0.1], -1.0).is_err());
        assert!(variance_path(&p, &[f64::NAN], 1.0).is_err());
        assert!(GarchParams::garch(0.0, 0.1, 0.8).is_err());
        assert!(GarchParams::garch(0.1, -0.1, 0.8).is_err());
        assert!(GarchParams::new(GarchVariant::Garch, 0.1, 0.1, 0.1, 0.8).is_err());
        assert!(GarchParams::new(GarchVariant::GjrGarch, 0.1, 0.1, -0.2, 0.8).is_err());
        assert!(GarchParams::new(GarchVariant::GjrGarch, 0.1, 0.1, -0.1, 0.8).is_ok());
    }

    #[test]
    fn likelihood_examples() {
        let p = GarchParams::garch(1.0, 0.0, 0.0).unwrap();
        let half_ln_2pi = 0.5 * (2.0 * PI).ln();
        assert!((log_likelihood(&p, &[0.0], 1.0).unwrap() + 0.918_938_533_204_672_7).abs() < 1e-12);
        assert!((log_likelihood(&p, &[0.0, 0.0], 1.0).unwrap() + (2.0 * PI).ln()).abs() < 1e-12);
        assert!((log_likelihood(&p, &[1.0], 1.0).unwrap() - (-half_ln_2pi - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn persistence_examples() {
        let p = GarchParams::garch(0.1, 0.1, 0.8).unwrap();
        assert!((persistence(&p).unwrap() - 0.9).abs() < 1e-15);
        assert!(persistence(&p).unwrap() >= HIGH_PERSISTENCE - 1e-12);
        assert_eq!(persistence(&GarchParams::garch(0.1, 0.0, 0.0).unwrap()).unwrap(), 0.0);
        assert!((persistence(&GarchParams::garch(0.1, 0.05, 0.90).unwrap()).unwrap() - 0.95).abs() < 1e-15);
        assert!(persistence(&params(GarchVariant::GjrGarch, 0.1, 0.1, 0.1, 0.8)).is_err());
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("gjr".parse::<GarchVariant>().unwrap(), GarchVariant::GjrGarch);
        assert_eq!("GJR-GARCH".parse::<GarchVariant>().unwrap(), GarchVariant::GjrGarch);
        assert_eq!("TGARCH".parse::<GarchVariant>().unwrap(), GarchVariant::Tgarch);
        assert!("egarch".parse::<GarchVariant>().is_err());
        assert_eq!(serde_json::to_string(&GarchVariant::GjrGarch).unwrap(), "\"GJR_GARCH\"");
    }

    fn variant_strategy() -> impl Strategy<Value = GarchVariant> {
        prop_oneof![
            Just(GarchVariant::Garch),
            Just(GarchVariant::GjrGarch),
            Just(GarchVariant::Tgarch)
        ]
    }

    proptest! {
        #[test]
        fn paths_strictly_positive(
            v in variant_strategy(),
            a0 in 1e-6f64..1.0, a in 0.0f64..0.5, g in 0.0f64..0.4, b in 0.0f64..0.95,
            eps in proptest::collection::vec(-5.0f64..5.0, 1..60),
            s0 in 1e-6f64..4.0,
        ) {
            let g = if v == GarchVariant::Garch { 0.0 } else { g };
            let p = params(v, a0, a, g, b);
            let path = variance_path(&p, &eps, s0).unwrap();
            prop_assert!(path.iter().all(|&s| s > 0.0));
        }

        #[test]
        fn alpha0_monotone(
            v in prop_oneof![Just(GarchVariant::Garch), Just(GarchVariant::GjrGarch)],
            a0 in 1e-4f64..1.0, bump in 1e-3f64..1.0, a in 0.0f64..0.5, g in 0.0f64..0.4, b in 0.0f64..0.95,
            eps in proptest::collection::vec(-5.0f64..5.0, 2..60),
        ) {
            let g = if v == GarchVariant::Garch { 0.0 } else { g };
            let lo = variance_path(&params(v, a0, a, g, b), &eps, 1.0).unwrap();
            let hi = variance_path(&params(v, a0 + bump, a, g, b), &eps, 1.0).unwrap();
            for t in 1..lo.len() {
                prop_assert!(hi[t] > lo[t]);
            }
        }

        #[test]
        fn scale_covariance(
            a0 in 1e-4f64..1.0, a in 0.0f64..0.5, b in 0.0f64..0.95,
            eps in proptest::collection::vec(-5.0f64..5.0, 1..60),
            s0 in 1e-3f64..4.0,
            c in 1e-3f64..1e3,
        ) {
            let base = variance_path(&GarchParams::garch(a0, a, b).unwrap(), &eps, s0).unwrap();
            let scaled_eps: Vec<f64> = eps.iter().map(|e| c * e).collect();
            let scaled = variance_path(&GarchParams::garch(c * c * a0, a, b).unwrap(), &scaled_eps, c * c * s0).unwrap();
            for (x, y) in base.iter().zip(&scaled) {
                prop_assert!((y - c * c * x).abs() <= 1e-13 * y.abs());
            }
            // powers of two scale without rounding
            let c = 4.0;
            let scaled_eps: Vec<f64> = eps.iter().map(|e| c * e).collect();
            let scaled = variance_path(&GarchParams::garch(c * c * a0, a, b).unwrap(), &scaled_eps, c * c * s0).unwrap();
            for (x, y) in base.iter().zip(&scaled) {
                prop_assert_eq!(*y, c * c * x);
            }
        }

        #[test]
        fn symmetric_reductions(
            a0 in 1e-4f64..1.0, a in 0.0f64..0.5, b in 0.0f64..0.95,
            eps in proptest::collection::vec(-5.0f64..5.0, 1..60),
        ) {
            let garch = variance_path(&params(GarchVariant::Garch, a0, a, 0.0, b), &eps, 0.5).unwrap();
            let gjr = variance_path(&params(GarchVariant::GjrGarch, a0, a, 0.0, b), &eps, 0.5).unwrap();
            prop_assert_eq!(garch, gjr);

            // TGARCH on positive residuals with gamma = 0 equals the symmetric
            // absolute-value recursion in volatility units
            let pos: Vec<f64> = eps.iter().map(|e| e.abs()).collect();
            let t0 = variance_path(&params(GarchVariant::Tgarch, a0, a, 0.0, b), &pos, 0.5).unwrap();
            let t1 = variance_path(&params(GarchVariant::Tgarch, a0, a, 0.3, b), &pos, 0.5).unwrap();
            prop_assert_eq!(&t0, &t1);
            let mut s = 0.5f64.sqrt();
            for (t, e) in pos.iter().enumerate() {
                prop_assert!((t0[t] - s * s).abs() <= 1e-12 * t0[t]);
                s = a0 + a * e + b * s;
            }
        }
    }
}

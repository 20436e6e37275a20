use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{backcast_variance, fit_mle_with, FitOptions, GarchFit};
use super::{extended_path, GarchVariant};
use crate::error::{Error, Result};
use crate::market_data::{return_windows, ReturnSeries, DEFAULT_WINDOW};
use crate::mean_model::{fit_ar, predict_mean};
use crate::series::VarianceSeries;

/// Variance forecast for the day after the window: runs the recursion over
/// the residuals from the backcast start and applies it once more.
pub fn forecast_one_step(fit: &GarchFit, residuals: &[f64]) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::invalid("cannot forecast from an empty window"));
    }
    let sigma0_sq = backcast_variance(residuals);
    let path = extended_path(&fit.params, residuals, sigma0_sq)?;
    Ok(*path.last().expect("non-empty path"))
}

/// How the residuals fed to the variance model are built from a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualSource {
    /// Window returns minus the window mean (constant-mean model).
    #[default]
    WindowDemeaned,
    /// One-step AR(1) residuals within the window (one fewer than the window length).
    ArResiduals,
}

impl ResidualSource {
    /// Residuals and the mean-model constant recorded in the fitted parameters.
    fn residuals(self, window: &[f64]) -> Result<(Vec<f64>, f64)> {
        match self {
            ResidualSource::WindowDemeaned => {
                let mean = window.iter().sum::<f64>() / window.len() as f64;
                Ok((window.iter().map(|r| r - mean).collect(), mean))
            }
            ResidualSource::ArResiduals => {
                let ar = fit_ar(window)?.model;
                let res = window
                    .windows(2)
                    .map(|p| p[1] - predict_mean(&ar, p[0]))
                    .collect();
                Ok((res, ar.intercept))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RollingOptions {
    pub window_len: usize,
    /// Refit every `refit_every` windows; windows in between reuse the last fit.
    pub refit_every: usize,
    pub residuals: ResidualSource,
    pub fit: FitOptions,
}

impl Default for RollingOptions {
    fn default() -> Self {
        Self {
            window_len: DEFAULT_WINDOW,
            refit_every: 1,
            residuals: ResidualSource::WindowDemeaned,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowFit {
    pub date: NaiveDate,
    pub fit: GarchFit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowFailure {
    pub date: NaiveDate,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct RollingForecast {
    pub variant: GarchVariant,
    /// One-step variance forecasts dated by the forecast day.
    pub forecasts: VarianceSeries,
    /// The fit used for each forecast, aligned with `forecasts`.
    pub fits: Vec<WindowFit>,
    /// Windows that produced no forecast.
    pub failures: Vec<WindowFailure>,
}

impl RollingForecast {
    pub fn non_converged(&self) -> usize {
        self.fits.iter().filter(|f| !f.fit.converged).count()
    }
}

pub fn rolling_forecast(series: &ReturnSeries, variant: GarchVariant, window_len: usize) -> Result<RollingForecast> {
    rolling_forecast_with(
        series,
        variant,
        &RollingOptions {
            window_len,
            ..Default::default()
        },
    )
}

/// Fits the variant on every trailing window and forecasts the next day's
/// variance. A window whose fit fails is skipped and listed in `failures`;
/// fits that stop without converging are kept and counted by
/// [`RollingForecast::non_converged`].
pub fn rolling_forecast_with(series: &ReturnSeries, variant: GarchVariant, opts: &RollingOptions) -> Result<RollingForecast> {
    if opts.refit_every == 0 {
        return Err(Error::invalid("refit_every must be at least 1"));
    }
    let windows = return_windows(series, opts.window_len)?;

    let residuals: Vec<Result<(Vec<f64>, f64)>> = windows
        .par_iter()
        .map(|w| opts.residuals.residuals(w.values))
        .collect();

    let fits: Vec<Result<GarchFit>> = (0..windows.len())
        .into_par_iter()
        .filter(|i| i % opts.refit_every == 0)
        .map(|i| {
            let (res, mean) = residuals[i].as_ref().map_err(|e| Error::data(e.to_string()))?;
            let mut fit = fit_mle_with(res, variant, &opts.fit)?;
            fit.params.mean = *mean;
            Ok(fit)
        })
        .collect();

    let outcomes: Vec<std::result::Result<(f64, GarchFit), String>> = windows
        .par_iter()
        .enumerate()
        .map(|(i, _)| {
            let fit = fits[i / opts.refit_every].as_ref().map_err(|e| e.to_string())?;
            let (res, mean) = residuals[i].as_ref().map_err(|e| e.to_string())?;
            let mut fit = *fit;
            fit.params.mean = *mean;
            let f = forecast_one_step(&fit, res).map_err(|e| e.to_string())?;
            if !(f > 0.0 && f.is_finite()) {
                return Err(format!("forecast {f} is not a positive variance"));
            }
            Ok((f, fit))
        })
        .collect();

    let mut dates = Vec::new();
    let mut values = Vec::new();
    let mut window_fits = Vec::new();
    let mut failures = Vec::new();
    for (w, outcome) in windows.iter().zip(outcomes) {
        match outcome {
            Ok((f, fit)) => {
                dates.push(w.target_date);
                values.push(f);
                window_fits.push(WindowFit {
                    date: w.target_date,
                    fit,
                });
            }
            Err(reason) => {
                log::warn!("{variant} window for {} skipped: {reason}", w.target_date);
                failures.push(WindowFailure {
                    date: w.target_date,
                    reason,
                });
            }
        }
    }
    Ok(RollingForecast {
        variant,
        forecasts: VarianceSeries::new(dates, values)?,
        fits: window_fits,
        failures,
    })
}

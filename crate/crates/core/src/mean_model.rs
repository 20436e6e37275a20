//! Rolling AR(1) mean forecasts and the squared-deviation variance target.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_dated_csv, write_dated_csv, ISO_DATE};
use crate::market_data::{return_windows, ReturnSeries};
pub use crate::series::VarianceSeries;

/// Lag-1 autoregressive mean: `mu = intercept + coefficient * r_prev`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    pub intercept: f64,
    pub coefficient: f64,
}

impl ArModel {
    pub fn new(intercept: f64, coefficient: f64) -> Result<Self> {
        if !(intercept.is_finite() && coefficient.is_finite()) {
            return Err(Error::invalid("AR model parameters must be finite"));
        }
        Ok(Self {
            intercept,
            coefficient,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArFit {
    pub model: ArModel,
    /// The regressor had zero variance and the model fell back to the window mean.
    pub degenerate: bool,
}

/// Least-squares fit over the pairs `(r[k-1], r[k])` in the window.
pub fn fit_ar(window: &[f64]) -> Result<ArFit> {
    if window.len() < 3 {
        return Err(Error::data(format!(
            "AR fit needs at least 3 observations, got {}",
            window.len()
        )));
    }
    if window.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("AR window contains non-finite values"));
    }
    let x = &window[..window.len() - 1];
    let y = &window[1..];
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mean_x) * (v - mean_x)).sum();
    let sxy: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mean_x) * (b - mean_y))
        .sum();

    // relative check so that tiny-but-varying returns are still fitted
    let scale = x.iter().map(|v| v * v).sum::<f64>();
    if sxx <= f64::EPSILON * scale || sxx == 0.0 {
        let mean = window.iter().sum::<f64>() / window.len() as f64;
        return Ok(ArFit {
            model: ArModel::new(mean, 0.0)?,
            degenerate: true,
        });
    }
    let coefficient = sxy / sxx;
    let intercept = mean_y - coefficient * mean_x;
    Ok(ArFit {
        model: ArModel::new(intercept, coefficient)?,
        degenerate: false,
    })
}

pub fn predict_mean(model: &ArModel, last_return: f64) -> f64 {
    model.intercept + model.coefficient * last_return
}

/// `(r_t - mu_hat)^2`.
pub fn realized_variance(r_t: f64, mu_hat: f64) -> f64 {
    let e = r_t - mu_hat;
    e * e
}

/// Ground-truth variance for every day that has a full trailing window.
/// Output is dated by the forecast day and aligned with the rolling windows.
pub fn ground_truth_series(series: &ReturnSeries, window_len: usize) -> Result<VarianceSeries> {
    let windows = return_windows(series, window_len)?;
    let values = windows
        .par_iter()
        .map(|w| {
            let fit = fit_ar(w.values)?;
            let last = *w.values.last().expect("non-empty window");
            let mu = predict_mean(&fit.model, last);
            Ok(realized_variance(series.values()[w.target_index], mu))
        })
        .collect::<Result<Vec<f64>>>()?;
    let dates = windows.iter().map(|w| w.target_date).collect();
    VarianceSeries::new(dates, values)
}

/// Writes `date,<column>`; `sigma2` for ground truth, `sigma2_pred` for forecasts.
pub fn write_variance_csv(series: &VarianceSeries, column: &str, path: impl AsRef<Path>) -> Result<()> {
    write_dated_csv(path.as_ref(), column, series.iter())
}

pub fn read_variance_csv(path: impl AsRef<Path>, column: &str) -> Result<VarianceSeries> {
    let rows = read_dated_csv(path.as_ref(), column, ISO_DATE, |v| {
        (v < 0.0).then(|| "negative variance".to_string())
    })?;
    VarianceSeries::from_pairs(rows)
}

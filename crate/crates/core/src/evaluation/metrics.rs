use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::VarianceSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: String,
    pub r2: f64,
    pub mse: f64,
    pub mae: f64,
    pub n: usize,
}

fn check_aligned(truth: &VarianceSeries, pred: &VarianceSeries, min_len: usize) -> Result<()> {
    if truth.dates() != pred.dates() {
        return Err(Error::invalid(format!(
            "truth ({} days) and prediction ({} days) are not date-aligned",
            truth.len(),
            pred.len()
        )));
    }
    if truth.len() < min_len {
        return Err(Error::invalid(format!("need at least {min_len} scored days, got {}", truth.len())));
    }
    Ok(())
}

/// `1 - SS_res / SS_tot` with the truth mean over the scored days as baseline.
pub fn r_squared(truth: &VarianceSeries, pred: &VarianceSeries) -> Result<f64> {
    check_aligned(truth, pred, 2)?;
    let y = truth.values();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::invalid("truth is constant; R² is undefined"));
    }
    let ss_res: f64 = y.iter().zip(pred.values()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn mse(truth: &VarianceSeries, pred: &VarianceSeries) -> Result<f64> {
    check_aligned(truth, pred, 1)?;
    let n = truth.len() as f64;
    Ok(truth.values().iter().zip(pred.values()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n)
}

pub fn mae(truth: &VarianceSeries, pred: &VarianceSeries) -> Result<f64> {
    check_aligned(truth, pred, 1)?;
    let n = truth.len() as f64;
    Ok(truth.values().iter().zip(pred.values()).map(|(a, b)| (a - b).abs()).sum::<f64>() / n)
}

pub fn evaluate(model: &str, truth: &VarianceSeries, pred: &VarianceSeries) -> Result<EvaluationReport> {
    Ok(EvaluationReport {
        model: model.to_string(),
        r2: r_squared(truth, pred)?,
        mse: mse(truth, pred)?,
        mae: mae(truth, pred)?,
        n: truth.len(),
    })
}

/// Both series restricted to their common dates.
pub fn align(a: &VarianceSeries, b: &VarianceSeries) -> (VarianceSeries, VarianceSeries) {
    let common: Vec<NaiveDate> = a.dates().iter().copied().filter(|d| b.get(*d).is_some()).collect();
    (a.restrict_to(&common), b.restrict_to(&common))
}

/// The same value on every date of `dates`.
pub fn constant_forecast(dates: &[NaiveDate], value: f64) -> Result<VarianceSeries> {
    VarianceSeries::new(dates.to_vec(), vec![value; dates.len()])
}

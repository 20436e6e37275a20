//! Aligns ground truth, GARCH forecasts and LSTM training samples.
//!
//! Every series is dated by the day it describes. A sample targets day `t`
//! of the truth series, takes the `window_len` truth values before it as
//! input, and pairs the truth at `t` with the GARCH forecast for `t`.
//! Samples whose target precedes the split boundary train the network; the
//! scaler is fitted on truth values dated before the boundary only.

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::neural::{train, GinnModel, LossSpec, ModelKind, TrainConfig, TrainingSample, VarianceScaler};
use crate::series::VarianceSeries;

#[derive(Debug, Clone)]
pub struct GinnDataset {
    truth: VarianceSeries,
    garch: VarianceSeries,
    window_len: usize,
    boundary: NaiveDate,
    scaler: VarianceScaler,
    train: Vec<TrainingSample>,
    train_dates: Vec<NaiveDate>,
    test_dates: Vec<NaiveDate>,
}

/// A trained model and its per-epoch training loss.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: GinnModel,
    pub loss_curve: Vec<f64>,
}

impl GinnDataset {
    pub fn build(truth: &VarianceSeries, garch: &VarianceSeries, window_len: usize, boundary: NaiveDate) -> Result<Self> {
        if window_len == 0 {
            return Err(Error::invalid("window length must be at least 1"));
        }
        let (train_truth, _) = truth.split_at_date(boundary)?;
        let scaler = VarianceScaler::fit(train_truth.values())?;
        let z = scaler.transform_all(truth.values());

        let mut train = Vec::new();
        let mut train_dates = Vec::new();
        let mut test_dates = Vec::new();
        for t in window_len..truth.len() {
            let date = truth.dates()[t];
            let Some(g) = garch.get(date) else { continue };
            if date < boundary {
                train.push(TrainingSample {
                    window: z[t - window_len..t].to_vec(),
                    truth: z[t],
                    garch: scaler.transform(g),
                });
                train_dates.push(date);
            } else {
                test_dates.push(date);
            }
        }
        if train.len() < 2 {
            return Err(Error::data(format!(
                "only {} training samples before {boundary}; need a longer training range",
                train.len()
            )));
        }
        if test_dates.is_empty() {
            return Err(Error::data(format!("no test days with aligned forecasts on or after {boundary}")));
        }
        Ok(Self {
            truth: truth.clone(),
            garch: garch.clone(),
            window_len,
            boundary,
            scaler,
            train,
            train_dates,
            test_dates,
        })
    }

    pub fn truth(&self) -> &VarianceSeries {
        &self.truth
    }

    pub fn garch(&self) -> &VarianceSeries {
        &self.garch
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn boundary(&self) -> NaiveDate {
        self.boundary
    }

    pub fn scaler(&self) -> VarianceScaler {
        self.scaler
    }

    pub fn samples(&self) -> &[TrainingSample] {
        &self.train
    }

    pub fn train_dates(&self) -> &[NaiveDate] {
        &self.train_dates
    }

    pub fn test_dates(&self) -> &[NaiveDate] {
        &self.test_dates
    }

    pub fn test_truth(&self) -> VarianceSeries {
        self.truth.restrict_to(&self.test_dates)
    }

    pub fn test_garch(&self) -> VarianceSeries {
        self.garch.restrict_to(&self.test_dates)
    }

    /// Trains one model with `template`'s settings and `seed`. The loss
    /// weight is forced by `kind` and the input window set to the dataset's.
    pub fn train_model(&self, kind: ModelKind, template: &TrainConfig, seed: u64) -> Result<TrainedModel> {
        let lambda = kind.lambda(template.loss.lambda());
        let mut config = template.clone();
        config.network.input_window = self.window_len;
        config.loss = LossSpec::new(lambda)?;
        config.seed = seed;
        let outcome = train(&self.train, &config)?;
        Ok(TrainedModel {
            model: GinnModel {
                kind,
                lambda,
                seed,
                epochs: config.epochs,
                scaler: self.scaler,
                network: outcome.network,
            },
            loss_curve: outcome.loss_curve,
        })
    }

    /// One model per seed, trained concurrently, returned in seed order.
    pub fn train_seeds(&self, kind: ModelKind, template: &TrainConfig, seeds: &[u64]) -> Result<Vec<TrainedModel>> {
        seeds.par_iter().map(|&s| self.train_model(kind, template, s)).collect()
    }

    /// Rolling predictions of `model` on the test days.
    pub fn predict_test(&self, model: &GinnModel) -> Result<VarianceSeries> {
        if model.input_window() != self.window_len {
            return Err(Error::invalid(format!(
                "model window {} does not match dataset window {}",
                model.input_window(),
                self.window_len
            )));
        }
        Ok(model.rolling_predict(&self.truth)?.restrict_to(&self.test_dates))
    }
}

/// Pointwise mean of date-identical series.
pub fn mean_series(series: &[VarianceSeries]) -> Result<VarianceSeries> {
    let first = series.first().ok_or_else(|| Error::invalid("no series to average"))?;
    if series.iter().any(|s| s.dates() != first.dates()) {
        return Err(Error::invalid("series to average have different dates"));
    }
    let n = series.len() as f64;
    let values = (0..first.len())
        .map(|i| series.iter().map(|s| s.values()[i]).sum::<f64>() / n)
        .collect();
    VarianceSeries::new(first.dates().to_vec(), values)
}

/// Date at `fraction` of the way through `dates` (by position).
pub fn boundary_at_fraction(dates: &[NaiveDate], fraction: f64) -> Result<NaiveDate> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    if dates.len() < 2 {
        return Err(Error::data("need at least two dates to split"));
    }
    let k = ((dates.len() as f64 * fraction).round() as usize).clamp(1, dates.len() - 1);
    Ok(dates[k])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::epoch_day;

    fn series(n: usize, f: impl Fn(usize) -> f64) -> VarianceSeries {
        VarianceSeries::new((0..n).map(epoch_day).collect(), (0..n).map(f).collect()).unwrap()
    }

    #[test]
    fn alignment_and_split() {
        let truth = series(200, |i| 1.0 + (i as f64 * 0.1).sin().abs());
        // garch forecasts only from day 30 on
        let garch = series(200, |i| 1.5 + 0.001 * i as f64).slice(30..200);
        let boundary = epoch_day(150);
        let ds = GinnDataset::build(&truth, &garch, 20, boundary).unwrap();
        assert_eq!(ds.train_dates().first(), Some(&epoch_day(30)));
        assert_eq!(ds.samples().len(), 120);
        assert_eq!(ds.test_dates().len(), 50);
        assert!(ds.train_dates().iter().all(|d| *d < boundary));
        assert!(ds.test_dates().iter().all(|d| *d >= boundary));

        // sample for day 40: truth window days 20..40, garch of day 40
        let s = &ds.samples()[10];
        let sc = ds.scaler();
        assert_eq!(s.window[0], sc.transform(truth.values()[20]));
        assert_eq!(s.truth, sc.transform(truth.values()[40]));
        assert_eq!(s.garch, sc.transform(garch.get(epoch_day(40)).unwrap()));

        // scaler sees only pre-boundary truth
        assert_eq!(sc, VarianceScaler::fit(&truth.values()[..150]).unwrap());
    }

    #[test]
    fn too_little_data() {
        let truth = series(50, |i| 1.0 + i as f64);
        assert!(GinnDataset::build(&truth, &truth, 45, epoch_day(46)).is_err());
        assert!(GinnDataset::build(&truth, &truth, 10, epoch_day(80)).is_err());
    }

    #[test]
    fn helpers() {
        let a = series(3, |i| i as f64);
        let b = series(3, |i| 3.0 * i as f64);
        assert_eq!(mean_series(&[a.clone(), b]).unwrap().values(), &[0.0, 2.0, 4.0]);
        assert!(mean_series(&[a.clone(), a.slice(0..2)]).is_err());
        let dates: Vec<_> = (0..10).map(epoch_day).collect();
        assert_eq!(boundary_at_fraction(&dates, 0.7).unwrap(), epoch_day(7));
        assert!(boundary_at_fraction(&dates, 1.0).is_err());
    }
}

//! Price ingestion, log returns, train/test partitioning and rolling windows.

use std::collections::HashMap;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::io::{read_dated_csv, write_dated_csv, ISO_DATE};
pub use crate::series::{PriceSeries, ReturnSeries};

/// Default rolling window length, in trading observations.
pub const DEFAULT_WINDOW: usize = 90;

/// Boundary between training and test data. Entries dated strictly before
/// `boundary` are training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub boundary: NaiveDate,
}

impl SplitSpec {
    pub fn new(boundary: NaiveDate) -> Self {
        Self { boundary }
    }
}

/// Loads a price CSV with ISO-8601 dates.
pub fn load_csv(path: impl AsRef<Path>) -> Result<PriceSeries> {
    load_csv_with_format(path, ISO_DATE)
}

/// Loads a price CSV whose `date` column uses a `chrono` format string.
///
/// Rows may appear in any order; the result is sorted by date. Duplicate
/// dates, non-positive closes and empty or NaN closes are rejected with the
/// offending line number.
pub fn load_csv_with_format(path: impl AsRef<Path>, date_format: &str) -> Result<PriceSeries> {
    let path = path.as_ref();
    let rows = read_dated_csv(path, "close", date_format, |v| {
        (v <= 0.0).then(|| "non-positive price".to_string())
    })?;

    // line numbers for duplicate reporting: header is line 1
    let mut seen: HashMap<NaiveDate, usize> = HashMap::with_capacity(rows.len());
    for (i, (date, _)) in rows.iter().enumerate() {
        if let Some(first) = seen.insert(*date, i + 2) {
            return Err(Error::Parse {
                line: i + 2,
                message: format!("duplicate date {date} (first seen at line {first})"),
            });
        }
    }

    let mut rows = rows;
    rows.sort_by_key(|(d, _)| *d);
    PriceSeries::from_pairs(rows)
}

/// Writes `date,close`.
pub fn write_prices_csv(prices: &PriceSeries, path: impl AsRef<Path>) -> Result<()> {
    write_dated_csv(path.as_ref(), "close", prices.iter())
}

/// Writes `date,log_return`.
pub fn write_returns_csv(returns: &ReturnSeries, path: impl AsRef<Path>) -> Result<()> {
    write_dated_csv(path.as_ref(), "log_return", returns.iter())
}

pub fn read_returns_csv(path: impl AsRef<Path>) -> Result<ReturnSeries> {
    let rows = read_dated_csv(path.as_ref(), "log_return", ISO_DATE, |_| None)?;
    ReturnSeries::from_pairs(rows)
}

/// `r_t = ln(P_t / P_{t-1})`, dated by the later day of each pair.
pub fn log_returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    if prices.len() < 2 {
        return Err(Error::data(format!(
            "need at least 2 prices for a return, got {}",
            prices.len()
        )));
    }
    let values = prices
        .values()
        .windows(2)
        .map(|p| (p[1] / p[0]).ln())
        .collect();
    ReturnSeries::new(prices.dates()[1..].to_vec(), values)
}

/// Partition into `(train, test)` at the boundary date.
pub fn split(series: &ReturnSeries, spec: SplitSpec) -> Result<(ReturnSeries, ReturnSeries)> {
    series.split_at_date(spec.boundary)
}

/// One trailing window of observations and the day it forecasts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RollingWindow<'a> {
    /// Observations for days `t - len .. t - 1`.
    pub values: &'a [f64],
    pub target_date: NaiveDate,
    /// Position of day `t` in the source series.
    pub target_index: usize,
}

/// Every trailing window of `window_len` observations that has a following
/// day to forecast, advancing one observation at a time.
pub fn windows<'a>(dates: &'a [NaiveDate], values: &'a [f64], window_len: usize) -> Result<Vec<RollingWindow<'a>>> {
    if window_len == 0 {
        return Err(Error::invalid("window length must be at least 1"));
    }
    if values.len() <= window_len {
        return Err(Error::data(format!(
            "series of length {} is too short for a {window_len}-observation window",
            values.len()
        )));
    }
    Ok((window_len..values.len())
        .map(|t| RollingWindow {
            values: &values[t - window_len..t],
            target_date: dates[t],
            target_index: t,
        })
        .collect())
}

/// Rolling windows over a return series.
pub fn return_windows(series: &ReturnSeries, window_len: usize) -> Result<Vec<RollingWindow<'_>>> {
    windows(series.dates(), series.values(), window_len)
}

//! Dated scalar series shared by prices, returns and variances.

use std::ops::Range;

use chrono::NaiveDate;

use crate::error::{Error, Result};

fn check_dates(dates: &[NaiveDate]) -> Result<()> {
    for (i, pair) in dates.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            return Err(Error::data(format!(
                "dates must be strictly increasing: {} follows {} at position {}",
                pair[1],
                pair[0],
                i + 1
            )));
        }
    }
    Ok(())
}

macro_rules! dated_series {
    ($(#[$meta:meta])* $name:ident, $check:expr, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct $name {
            dates: Vec<NaiveDate>,
            values: Vec<f64>,
        }

        impl $name {
            pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
                if dates.len() != values.len() {
                    return Err(Error::invalid(format!(
                        "{} dates but {} values",
                        dates.len(),
                        values.len()
                    )));
                }
                check_dates(&dates)?;
                let check: fn(f64) -> bool = $check;
                if let Some(i) = values.iter().position(|&v| !check(v)) {
                    return Err(Error::data(format!(
                        concat!("invalid ", $what, " {} on {}"),
                        values[i], dates[i]
                    )));
                }
                Ok(Self { dates, values })
            }

            pub fn from_pairs(pairs: impl IntoIterator<Item = (NaiveDate, f64)>) -> Result<Self> {
                let (dates, values) = pairs.into_iter().unzip();
                Self::new(dates, values)
            }

            pub fn dates(&self) -> &[NaiveDate] {
                &self.dates
            }

            pub fn values(&self) -> &[f64] {
                &self.values
            }

            pub fn len(&self) -> usize {
                self.values.len()
            }

            pub fn is_empty(&self) -> bool {
                self.values.is_empty()
            }

            pub fn first_date(&self) -> Option<NaiveDate> {
                self.dates.first().copied()
            }

            pub fn last_date(&self) -> Option<NaiveDate> {
                self.dates.last().copied()
            }

            pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
                self.dates.iter().copied().zip(self.values.iter().copied())
            }

            /// Sub-series over a positional range.
            pub fn slice(&self, range: Range<usize>) -> Self {
                Self {
                    dates: self.dates[range.clone()].to_vec(),
                    values: self.values[range].to_vec(),
                }
            }

            /// Index of the first entry dated on or after `date`.
            pub fn position_on_or_after(&self, date: NaiveDate) -> usize {
                self.dates.partition_point(|d| *d < date)
            }

            /// Entries dated strictly before `boundary` and entries on/after it.
            /// Both halves must be non-empty.
            pub fn split_at_date(&self, boundary: NaiveDate) -> Result<(Self, Self)> {
                match (self.first_date(), self.last_date()) {
                    (Some(first), Some(last)) if first < boundary && boundary <= last => {
                        let k = self.position_on_or_after(boundary);
                        Ok((self.slice(0..k), self.slice(k..self.len())))
                    }
                    (Some(first), Some(last)) => Err(Error::invalid(format!(
                        "split boundary {boundary} is not inside the series range {first}..={last}"
                    ))),
                    _ => Err(Error::invalid("cannot split an empty series")),
                }
            }

            /// Keep only the entries whose dates appear in `dates` (which must be sorted).
            pub fn restrict_to(&self, dates: &[NaiveDate]) -> Self {
                let (d, v) = self
                    .iter()
                    .filter(|(date, _)| dates.binary_search(date).is_ok())
                    .unzip();
                Self { dates: d, values: v }
            }

            /// Value on an exact date, if present.
            pub fn get(&self, date: NaiveDate) -> Option<f64> {
                self.dates.binary_search(&date).ok().map(|i| self.values[i])
            }
        }
    };
}

dated_series!(
    /// Dated daily closing prices; every close is strictly positive.
    PriceSeries,
    |v| v.is_finite() && v > 0.0,
    "price"
);

dated_series!(
    /// Dated daily log returns.
    ReturnSeries,
    |v| v.is_finite(),
    "return"
);

dated_series!(
    /// Dated variances (ground truth or predicted); every value is finite and non-negative.
    VarianceSeries,
    |v| v.is_finite() && v >= 0.0,
    "variance"
);

/// Synthetic calendar: day `i` is `1970-01-01 + i` days.
pub fn epoch_day(i: usize) -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch") + chrono::Days::new(i as u64)
}

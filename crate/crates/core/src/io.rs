//! Two-column dated CSV files (`date,<value>`).

use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};

pub const ISO_DATE: &str = "%Y-%m-%d";

/// Column lookup is case-insensitive and ignores surrounding whitespace.
pub(crate) fn find_column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name))
}

/// Reads `(date, value)` rows in file order. `check` validates each value and
/// returns an error message for rejected ones.
pub(crate) fn read_dated_csv(
    path: &Path,
    value_column: &str,
    date_format: &str,
    check: impl Fn(f64) -> Option<String>,
) -> Result<Vec<(NaiveDate, f64)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: format!("unreadable header: {e}"),
        })?
        .clone();
    let date_idx = find_column(&headers, "date").ok_or_else(|| Error::Parse {
        line: 1,
        message: "header has no `date` column".into(),
    })?;
    let value_idx = find_column(&headers, value_column).ok_or_else(|| Error::Parse {
        line: 1,
        message: format!("header has no `{value_column}` column"),
    })?;

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: format!("malformed row: {e}"),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let raw_date = record.get(date_idx).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(raw_date, date_format).map_err(|e| Error::Parse {
            line,
            message: format!("malformed date `{raw_date}` ({e})"),
        })?;
        let raw_value = record.get(value_idx).unwrap_or("").trim();
        let value: f64 = raw_value.parse().map_err(|_| Error::Parse {
            line,
            message: format!("malformed {value_column} value `{raw_value}`"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("non-finite {value_column} value `{raw_value}`"),
            });
        }
        if let Some(message) = check(value) {
            return Err(Error::Parse { line, message });
        }
        rows.push((date, value));
    }
    Ok(rows)
}

/// Writes `date,<value_header>` rows. Values use the shortest representation
/// that parses back to the same `f64`.
pub(crate) fn write_dated_csv(
    path: &Path,
    value_header: &str,
    rows: impl Iterator<Item = (NaiveDate, f64)>,
) -> Result<()> {
    let mut out = String::new();
    out.push_str("date,");
    out.push_str(value_header);
    out.push('\n');
    for (date, value) in rows {
        out.push_str(&format!("{},{}\n", date.format(ISO_DATE), value));
    }
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Writes a plain comma-separated table with a header row.
pub(crate) fn write_table(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

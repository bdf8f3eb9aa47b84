//! Weekly CSV ingestion.

use std::path::Path;

use betats::copula_model::BoundedSeries;
use betats::regressors::Columns;
use chrono::NaiveDate;

use crate::error::{CliError, CliResult};

pub const DATE_COLUMN: &str = "date";
pub const VALUE_COLUMN: &str = "value";

/// A weekly series with its dummy columns.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub dates: Vec<NaiveDate>,
    /// Values after the optional squeeze.
    pub values: Vec<f64>,
    pub dummies: Columns<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn start(&self) -> NaiveDate {
        self.dates[0]
    }

    pub fn last(&self) -> NaiveDate {
        *self.dates.last().expect("non-empty dataset")
    }

    pub fn series(&self, period: u32) -> CliResult<BoundedSeries<f64>> {
        Ok(BoundedSeries::new(self.values.clone())?.with_start_date(self.start()).with_period(period))
    }
}

fn parse_date(s: &str, line: u64) -> CliResult<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|_| CliError::Data(format!("line {line}: `{s}` is not an ISO-8601 date (YYYY-MM-DD)")))
}

fn parse_number(s: &str, what: &str, line: u64) -> CliResult<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(CliError::Data(format!("line {line}: {what} `{s}` is not a finite number"))),
    }
}

fn open(path: &Path) -> CliResult<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

/// Reads `date,value[,dummy...]`, checking consecutive weekly dates, values
/// in `(0,1)` (or `[0,1]` with `squeeze`) and 0/1 dummies.
pub fn read_dataset(path: &Path, squeeze: bool) -> CliResult<Dataset> {
    let mut rdr = open(path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("{}: missing `{name}` column", path.display())))
    };
    let (di, vi) = (find(DATE_COLUMN)?, find(VALUE_COLUMN)?);
    let dummy_cols: Vec<(usize, String)> =
        headers.iter().enumerate().filter(|&(i, _)| i != di && i != vi).map(|(i, h)| (i, h.to_string())).collect();

    let mut dates = Vec::new();
    let mut raw = Vec::new();
    let mut dummies: Columns<f64> = dummy_cols.iter().map(|(_, n)| (n.clone(), Vec::new())).collect();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let date = parse_date(&rec[di], line)?;
        if let Some(&prev) = dates.last() {
            if date - prev != chrono::Duration::weeks(1) {
                return Err(CliError::Data(format!(
                    "line {line}: date {date} does not follow {prev} by one week (gaps are not allowed)"
                )));
            }
        }
        let value = parse_number(&rec[vi], "value", line)?;
        if squeeze {
            if !(0.0..=1.0).contains(&value) {
                return Err(CliError::Data(format!("line {line}: value {value} lies outside [0,1]")));
            }
        } else if !(value > 0.0 && value < 1.0) {
            return Err(CliError::Data(format!(
                "line {line}: value {value} is not strictly inside (0,1); pass --squeeze to pull boundary values in"
            )));
        }
        for (i, name) in &dummy_cols {
            let v = parse_number(&rec[*i], name, line)?;
            if v != 0.0 && v != 1.0 {
                return Err(CliError::Data(format!("line {line}: dummy `{name}` must be 0 or 1, got {v}")));
            }
            dummies.get_mut(name).expect("column registered").push(v);
        }
        dates.push(date);
        raw.push(value);
    }
    if raw.is_empty() {
        return Err(CliError::Data(format!("{}: no observations", path.display())));
    }
    let values = if squeeze { BoundedSeries::squeezed(&raw)?.values().to_vec() } else { raw };
    Ok(Dataset { dates, values, dummies })
}

/// Future dummy values: row `i` of the file is used at lag `i + 1`.
/// A `date` column, if present, is ignored.
pub fn read_future(path: &Path) -> CliResult<Columns<f64>> {
    let mut rdr = open(path)?;
    let headers = rdr.headers()?.clone();
    let mut cols: Columns<f64> =
        headers.iter().filter(|h| *h != DATE_COLUMN).map(|h| (h.to_string(), Vec::new())).collect();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        for (h, field) in headers.iter().zip(rec.iter()) {
            if h != DATE_COLUMN {
                let v = parse_number(field, h, line)?;
                cols.get_mut(h).expect("column registered").push(v);
            }
        }
    }
    Ok(cols)
}

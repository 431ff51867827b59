//! Daily price series: ingestion, log transform and chronological splitting.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// CSV layout of an input price file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CsvFormat {
    /// `Date,Close`, ISO dates, extra columns ignored.
    #[default]
    Generic,
    /// `Date,Open,High,Low,Close,Adj Close,Volume`.
    Yahoo,
    /// `Date,Open,High,Low,Close,Volume`.
    Stooq,
}

impl FromStr for CsvFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "generic" => Ok(Self::Generic),
            "yahoo" => Ok(Self::Yahoo),
            "stooq" => Ok(Self::Stooq),
            other => Err(Error::Format(format!("unknown csv format `{other}`"))),
        }
    }
}

impl CsvFormat {
    fn required_columns(self) -> &'static [&'static str] {
        match self {
            Self::Generic => &["Date", "Close"],
            Self::Yahoo => &["Date", "Open", "High", "Low", "Close"],
            Self::Stooq => &["Date", "Open", "High", "Low", "Close"],
        }
    }

    fn parse_date(self, raw: &str) -> Option<NaiveDate> {
        let raw = raw.trim();
        match self {
            Self::Generic => NaiveDate::parse_from_str(raw, "%Y-%m-%d").ok(),
            // yfinance exports carry a time and offset after the date
            Self::Yahoo => raw
                .get(..10)
                .and_then(|d| NaiveDate::parse_from_str(d, "%Y-%m-%d").ok()),
            Self::Stooq => NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                .or_else(|_| NaiveDate::parse_from_str(raw, "%Y%m%d"))
                .ok(),
        }
    }
}

/// Closing prices of one asset on strictly increasing dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PriceSeries<T: Real> {
    asset_id: String,
    dates: Vec<NaiveDate>,
    close: Vec<T>,
}

impl<T: Real> PriceSeries<T> {
    pub fn new(asset_id: impl Into<String>, dates: Vec<NaiveDate>, close: Vec<T>) -> Result<Self> {
        if dates.len() != close.len() {
            return Err(Error::Contract(format!(
                "{} dates but {} prices",
                dates.len(),
                close.len()
            )));
        }
        if dates.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "price series needs at least 2 rows, got {}",
                dates.len()
            )));
        }
        check_increasing(&dates)?;
        if let Some(i) = close.iter().position(|p| !(p.is_finite() && *p > T::zero())) {
            return Err(Error::Domain(format!(
                "non-positive or non-finite close {} on {}",
                close[i], dates[i]
            )));
        }
        Ok(Self {
            asset_id: asset_id.into(),
            dates,
            close,
        })
    }

    pub fn asset_id(&self) -> &str {
        &self.asset_id
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn close(&self) -> &[T] {
        &self.close
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn first_date(&self) -> NaiveDate {
        self.dates[0]
    }

    pub fn last_date(&self) -> NaiveDate {
        self.dates[self.dates.len() - 1]
    }

    /// Rows with `from <= date <= to`.
    pub fn between(&self, from: NaiveDate, to: NaiveDate) -> Result<Self> {
        let (lo, hi) = date_range(&self.dates, from, to);
        Self::new(
            self.asset_id.clone(),
            self.dates[lo..hi].to_vec(),
            self.close[lo..hi].to_vec(),
        )
    }

    /// Serializes as `Date,Close` with shortest round-trip decimal formatting.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "Date,Close")?;
        for (d, p) in self.dates.iter().zip(&self.close) {
            writeln!(out, "{},{}", d.format("%Y-%m-%d"), p)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }
}

/// Natural logarithm of a price series, date-aligned with its source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LogSeries<T: Real> {
    asset_id: String,
    dates: Vec<NaiveDate>,
    values: Vec<T>,
}

impl<T: Real> LogSeries<T> {
    pub fn new(asset_id: impl Into<String>, dates: Vec<NaiveDate>, values: Vec<T>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::Contract(format!(
                "{} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        check_increasing(&dates)?;
        Ok(Self {
            asset_id: asset_id.into(),
            dates,
            values,
        })
    }

    pub fn asset_id(&self) -> &str {
        &self.asset_id
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn between(&self, from: NaiveDate, to: NaiveDate) -> Self {
        let (lo, hi) = date_range(&self.dates, from, to);
        Self {
            asset_id: self.asset_id.clone(),
            dates: self.dates[lo..hi].to_vec(),
            values: self.values[lo..hi].to_vec(),
        }
    }

    /// Inverse of [`log_transform`].
    pub fn exp(&self) -> Result<PriceSeries<T>> {
        PriceSeries::new(
            self.asset_id.clone(),
            self.dates.clone(),
            self.values.iter().map(|v| v.exp()).collect(),
        )
    }
}

/// Chronological train / validation / test boundaries (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub val_start: NaiveDate,
    pub val_end: NaiveDate,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
}

impl SplitSpec {
    pub fn new(
        train: (NaiveDate, NaiveDate),
        val: (NaiveDate, NaiveDate),
        test: (NaiveDate, NaiveDate),
    ) -> Result<Self> {
        let s = Self {
            train_start: train.0,
            train_end: train.1,
            val_start: val.0,
            val_end: val.1,
            test_start: test.0,
            test_end: test.1,
        };
        s.validate()?;
        Ok(s)
    }

    /// Seven years of training ending on 31 Dec of `first_year + 6`, the last two
    /// of which are validation, followed by three years of test data.
    pub fn seven_two_three(first_year: i32) -> Self {
        let ymd = |y, m, d| NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date");
        Self {
            train_start: ymd(first_year, 1, 1),
            train_end: ymd(first_year + 6, 12, 31),
            val_start: ymd(first_year + 5, 1, 1),
            val_end: ymd(first_year + 6, 12, 31),
            test_start: ymd(first_year + 7, 1, 1),
            test_end: ymd(first_year + 9, 12, 31),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.train_start < self.val_start
            && self.val_start <= self.val_end
            && self.val_end <= self.train_end
            && self.train_end < self.test_start
            && self.test_start <= self.test_end;
        if ok {
            Ok(())
        } else {
            Err(Error::Split(format!("inconsistent split boundaries: {self:?}")))
        }
    }
}

/// The three partitions produced by [`split`].
#[derive(Debug, Clone)]
pub struct Partitions<T: Real> {
    pub train: PriceSeries<T>,
    pub val: PriceSeries<T>,
    pub test: PriceSeries<T>,
}

/// Elementwise natural log of the closes.
pub fn log_transform<T: Real>(p: &PriceSeries<T>) -> Result<LogSeries<T>> {
    Ok(LogSeries {
        asset_id: p.asset_id.clone(),
        dates: p.dates.clone(),
        values: log_values(&p.close)?,
    })
}

/// Natural log of a raw price slice.
pub fn log_values<T: Real>(prices: &[T]) -> Result<Vec<T>> {
    prices
        .iter()
        .map(|&p| {
            if p > T::zero() {
                Ok(p.ln())
            } else {
                Err(Error::Domain(format!("cannot take log of price {p}")))
            }
        })
        .collect()
}

/// Splits `p` into train, validation (a tail sub-window of train) and test partitions.
pub fn split<T: Real>(p: &PriceSeries<T>, s: &SplitSpec) -> Result<Partitions<T>> {
    s.validate()?;
    let part = |from, to, name: &str| {
        let (lo, hi) = date_range(&p.dates, from, to);
        if hi - lo < 2 {
            return Err(Error::Split(format!(
                "{name} partition {from}..{to} holds {} rows",
                hi - lo
            )));
        }
        p.between(from, to)
    };
    Ok(Partitions {
        train: part(s.train_start, s.train_end, "train")?,
        val: part(s.val_start, s.val_end, "validation")?,
        test: part(s.test_start, s.test_end, "test")?,
    })
}

/// Outcome of [`load_csv_with_report`].
#[derive(Debug, Clone)]
pub struct LoadReport<T: Real> {
    pub series: PriceSeries<T>,
    /// Rows dropped for an unparsable date or a missing / non-positive close.
    pub rejected_rows: usize,
    pub duplicate_dates: usize,
}

pub fn load_csv<T: Real>(path: impl AsRef<Path>, format: CsvFormat) -> Result<PriceSeries<T>> {
    load_csv_with_report(path, format).map(|r| r.series)
}

pub fn load_csv_with_report<T: Real>(path: impl AsRef<Path>, format: CsvFormat) -> Result<LoadReport<T>> {
    let path = path.as_ref();
    let asset_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let file = std::fs::File::open(path)?;
    read_csv(file, asset_id, format)
}

/// Parses price rows from any reader; the core of [`load_csv`].
pub fn read_csv<T: Real, R: Read>(
    reader: R,
    asset_id: impl Into<String>,
    format: CsvFormat,
) -> Result<LoadReport<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
    };
    for name in format.required_columns() {
        if column(name).is_none() {
            return Err(Error::Format(format!(
                "missing `{name}` column (header: {})",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
    }
    let date_col = column("Date").expect("checked above");
    let close_col = column("Close").expect("checked above");

    let mut rows: BTreeMap<NaiveDate, T> = BTreeMap::new();
    let mut rejected = 0;
    let mut duplicates = 0;
    for record in rdr.records() {
        let record = record?;
        let date = record.get(date_col).and_then(|d| format.parse_date(d));
        let close = record
            .get(close_col)
            .and_then(|c| c.parse::<f64>().ok())
            .filter(|c| c.is_finite() && *c > 0.0)
            .and_then(T::from_f64);
        match (date, close) {
            (Some(d), Some(c)) => {
                if rows.insert(d, c).is_some() {
                    duplicates += 1;
                }
            }
            _ => rejected += 1,
        }
    }
    if rejected > 0 {
        log::warn!("rejected {rejected} unparsable or non-positive rows");
    }
    if rows.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} valid rows, at least 2 required",
            rows.len()
        )));
    }
    let (dates, close) = rows.into_iter().unzip();
    Ok(LoadReport {
        series: PriceSeries::new(asset_id, dates, close)?,
        rejected_rows: rejected,
        duplicate_dates: duplicates,
    })
}

fn check_increasing(dates: &[NaiveDate]) -> Result<()> {
    match dates.windows(2).position(|w| w[0] >= w[1]) {
        Some(i) => Err(Error::Contract(format!(
            "dates not strictly increasing at {} -> {}",
            dates[i],
            dates[i + 1]
        ))),
        None => Ok(()),
    }
}

/// Half-open index range of `dates` falling inside `[from, to]`.
pub(crate) fn date_range(dates: &[NaiveDate], from: NaiveDate, to: NaiveDate) -> (usize, usize) {
    let lo = dates.partition_point(|d| *d < from);
    let hi = dates.partition_point(|d| *d <= to).max(lo);
    (lo, hi)
}

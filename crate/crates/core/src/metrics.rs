//! Forecast-error and trading-performance metrics, and their tabular rendering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{sample_variance, Real};
use crate::trading::EquityLine;

pub const TRADING_DAYS: f64 = 252.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ForecastMetrics<T: Real> {
    pub rmse: T,
    pub mae: T,
    /// Mean absolute percentage error as a fraction; absent when an actual value is zero.
    pub mape: Option<T>,
}

fn check_pair<T>(actual: &[T], predicted: &[T]) -> Result<()> {
    if actual.is_empty() || actual.len() != predicted.len() {
        return Err(Error::Contract(format!(
            "forecast metrics need equal nonzero lengths, got {} and {}",
            actual.len(),
            predicted.len()
        )));
    }
    Ok(())
}

/// Mean of `|(yhat - y) / y|`.
pub fn mape<T: Real>(actual: &[T], predicted: &[T]) -> Result<T> {
    check_pair(actual, predicted)?;
    if actual.iter().any(|&y| y == T::zero()) {
        return Err(Error::Domain("MAPE undefined for a zero actual value".into()));
    }
    let n = T::from_usize_lossy(actual.len());
    Ok(actual
        .iter()
        .zip(predicted)
        .map(|(&y, &p)| ((p - y) / y).abs())
        .sum::<T>()
        / n)
}

pub fn forecast_metrics<T: Real>(actual: &[T], predicted: &[T]) -> Result<ForecastMetrics<T>> {
    check_pair(actual, predicted)?;
    let n = T::from_usize_lossy(actual.len());
    let (mut sq, mut abs) = (T::zero(), T::zero());
    for (&y, &p) in actual.iter().zip(predicted) {
        sq += (p - y) * (p - y);
        abs += (p - y).abs();
    }
    Ok(ForecastMetrics {
        rmse: (sq / n).sqrt(),
        mae: abs / n,
        mape: mape(actual, predicted).ok(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TradingMetrics<T: Real> {
    pub arc: T,
    pub asd: T,
    pub md: T,
    pub ir: Option<T>,
    pub sr: Option<T>,
}

/// Annualized return and volatility, maximum drawdown, information and Sortino ratios of an
/// equity line. Daily returns are read off consecutive equity ratios.
pub fn trading_metrics<T: Real>(e: &EquityLine<T>) -> Result<TradingMetrics<T>> {
    let v = &e.equity;
    if v.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "trading metrics need at least 2 equity points, got {}",
            v.len()
        )));
    }
    if v.iter().any(|&x| !(x > T::zero()) || !x.is_finite()) {
        return Err(Error::Domain("equity must stay positive and finite".into()));
    }
    let days = T::lit(TRADING_DAYS);
    let returns: Vec<T> = v.windows(2).map(|w| w[1] / w[0] - T::one()).collect();
    let years = T::from_usize_lossy(returns.len()) / days;
    let arc = (v[v.len() - 1] / v[0]).powf(T::one() / years) - T::one();

    let annualize = |xs: &[T]| (days * sample_variance(xs)).sqrt();
    let asd = if returns.len() >= 2 {
        annualize(&returns)
    } else {
        T::zero()
    };

    let mut peak = v[0];
    let mut md = T::zero();
    for &x in v {
        peak = peak.max(x);
        md = md.max((peak - x) / peak);
    }

    let negative: Vec<T> = returns.iter().copied().filter(|&r| r < T::zero()).collect();
    let asd_down = (negative.len() >= 2).then(|| annualize(&negative));
    let ratio = |den: T| (den > T::zero()).then(|| arc / den);
    Ok(TradingMetrics {
        arc,
        asd,
        md,
        ir: ratio(asd),
        sr: asd_down.and_then(ratio),
    })
}

/// Which metric columns a table carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableLayout {
    /// RMSE, MAE, MAPE (%).
    Forecast,
    /// ARC (%), ASD (%), MD (%), IR, SR.
    Trading,
}

impl TableLayout {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Self::Forecast => &["RMSE", "MAE", "MAPE"],
            Self::Trading => &["ARC", "ASD", "MD", "IR", "SR"],
        }
    }
}

/// Method-by-metric comparison table in display units (percentages where applicable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub title: String,
    pub layout: TableLayout,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.2}"))
}

impl MetricsTable {
    pub fn trading<T: Real>(title: impl Into<String>, rows: &[(String, TradingMetrics<T>)]) -> Self {
        let pct = |x: T| Some(100.0 * x.to_f64_lossy());
        Self {
            title: title.into(),
            layout: TableLayout::Trading,
            rows: rows
                .iter()
                .map(|(m, t)| {
                    let vals = vec![
                        pct(t.arc),
                        pct(t.asd),
                        pct(t.md),
                        t.ir.map(Real::to_f64_lossy),
                        t.sr.map(Real::to_f64_lossy),
                    ];
                    (m.clone(), vals)
                })
                .collect(),
        }
    }

    pub fn forecast<T: Real>(title: impl Into<String>, rows: &[(String, ForecastMetrics<T>)]) -> Self {
        Self {
            title: title.into(),
            layout: TableLayout::Forecast,
            rows: rows
                .iter()
                .map(|(m, f)| {
                    let vals = vec![
                        Some(f.rmse.to_f64_lossy()),
                        Some(f.mae.to_f64_lossy()),
                        f.mape.map(|x| 100.0 * x.to_f64_lossy()),
                    ];
                    (m.clone(), vals)
                })
                .collect(),
        }
    }

    /// `Method,<columns>` with two decimals and `NA` for undefined values.
    pub fn to_csv(&self) -> String {
        let mut s = format!("Method,{}\n", self.layout.columns().join(","));
        for (m, vals) in &self.rows {
            s.push_str(m);
            for v in vals {
                s.push(',');
                s.push_str(&cell(*v));
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(title: impl Into<String>, csv_text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
        let headers = rdr.headers()?.clone();
        let cols: Vec<&str> = headers.iter().skip(1).collect();
        let layout = [TableLayout::Forecast, TableLayout::Trading]
            .into_iter()
            .find(|l| l.columns() == cols.as_slice())
            .ok_or_else(|| Error::Format(format!("unknown table columns {cols:?}")))?;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .skip(1)
                .map(|v| match v {
                    "NA" => Ok(None),
                    x => x
                        .parse::<f64>()
                        .map(Some)
                        .map_err(|e| Error::Format(format!("bad table value {x:?}: {e}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push((rec[0].to_string(), vals));
        }
        Ok(Self {
            title: title.into(),
            layout,
            rows,
        })
    }

    /// Fixed-width text rendering with a title line.
    pub fn to_text(&self) -> String {
        let cols = self.layout.columns();
        let method_w = self
            .rows
            .iter()
            .map(|r| r.0.chars().count())
            .chain(std::iter::once("Method".len()))
            .max()
            .unwrap_or(6);
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|(_, v)| v.iter().map(|x| cell(*x)).collect())
            .collect();
        let widths: Vec<usize> = cols
            .iter()
            .enumerate()
            .map(|(j, c)| {
                cells
                    .iter()
                    .map(|r| r[j].len())
                    .chain([c.len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut s = format!("{}\n{:<method_w$}", self.title, "Method");
        for (c, w) in cols.iter().zip(&widths) {
            s.push_str(&format!("  {c:>w$}"));
        }
        s.push('\n');
        for ((m, _), r) in self.rows.iter().zip(&cells) {
            let pad = method_w - m.chars().count();
            s.push_str(m);
            s.push_str(&" ".repeat(pad));
            for (c, w) in r.iter().zip(&widths) {
                s.push_str(&format!("  {c:>w$}"));
            }
            s.push('\n');
        }
        s
    }
}

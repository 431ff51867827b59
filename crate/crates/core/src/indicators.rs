//! Technical indicators and the LSTM feature matrix.
//!
//! Every indicator returns only its defined values: an indicator with warm-up `w`
//! applied to `n` prices yields `n - w` outputs aligned with the last `n - w` inputs.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracdiff::DiffSeries;
use crate::scalar::Real;
use crate::timeseries::{PriceSeries, SplitSpec};

fn check_window(k: usize, min: usize, what: &str) -> Result<()> {
    if k < min {
        Err(Error::Contract(format!(
            "{what} window must be >= {min}, got {k}"
        )))
    } else {
        Ok(())
    }
}

fn check_len(n: usize, need: usize, what: &str) -> Result<()> {
    if n < need {
        Err(Error::InsufficientData(format!(
            "{what} needs {need} values, got {n}"
        )))
    } else {
        Ok(())
    }
}

/// Rolling unweighted mean over `k` values.
pub fn sma<T: Real>(p: &[T], k: usize) -> Result<Vec<T>> {
    check_window(k, 1, "SMA")?;
    check_len(p.len(), k, "SMA")?;
    let kf = T::from_usize_lossy(k);
    Ok(p.windows(k).map(|w| w.iter().copied().sum::<T>() / kf).collect())
}

/// Bollinger bands `SMA_k +/- mult * sigma_k` with the sample (divisor `k - 1`) deviation.
pub fn bbands<T: Real>(p: &[T], k: usize, mult: T) -> Result<(Vec<T>, Vec<T>)> {
    check_window(k, 2, "Bollinger")?;
    check_len(p.len(), k, "Bollinger bands")?;
    let kf = T::from_usize_lossy(k);
    let (upper, lower) = p
        .windows(k)
        .map(|w| {
            let m = w.iter().copied().sum::<T>() / kf;
            let var = w.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / (kf - T::one());
            let band = var.sqrt() * mult;
            (m + band, m - band)
        })
        .unzip();
    Ok((upper, lower))
}

/// Relative strength index from simple `k`-change averages of gains and losses.
///
/// A window without any loss scores 100, without any gain 0, and a flat window 50.
pub fn rsi<T: Real>(p: &[T], k: usize) -> Result<Vec<T>> {
    check_window(k, 1, "RSI")?;
    check_len(p.len(), k + 1, "RSI")?;
    let hundred = T::lit(100.0);
    let changes: Vec<T> = p.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(changes
        .windows(k)
        .map(|w| {
            let gain: T = w.iter().map(|&c| c.max(T::zero())).sum();
            let loss: T = w.iter().map(|&c| (-c).max(T::zero())).sum();
            if loss == T::zero() && gain == T::zero() {
                T::lit(50.0)
            } else if loss == T::zero() {
                hundred
            } else {
                // the 1/k factors of both averages cancel
                let rs = gain / loss;
                hundred - hundred / (T::one() + rs)
            }
        })
        .collect())
}

/// Exponential moving average with `alpha = 2 / (k + 1)`, seeded by the SMA of the first `k` values.
pub fn ema<T: Real>(p: &[T], k: usize) -> Result<Vec<T>> {
    check_window(k, 1, "EMA")?;
    check_len(p.len(), k, "EMA")?;
    let alpha = T::lit(2.0) / T::from_usize_lossy(k + 1);
    let seed = p[..k].iter().copied().sum::<T>() / T::from_usize_lossy(k);
    let mut out = Vec::with_capacity(p.len() - k + 1);
    out.push(seed);
    for &x in &p[k..] {
        let prev = *out.last().expect("seeded");
        out.push(alpha * x + (T::one() - alpha) * prev);
    }
    Ok(out)
}

/// MACD line (`EMA_fast - EMA_slow`) and its signal line (`EMA_signal` of the MACD line).
pub fn macd<T: Real>(p: &[T], fast: usize, slow: usize, signal: usize) -> Result<(Vec<T>, Vec<T>)> {
    if fast >= slow {
        return Err(Error::Contract(format!(
            "MACD fast period {fast} must be shorter than slow period {slow}"
        )));
    }
    check_window(fast, 1, "MACD")?;
    check_window(signal, 1, "MACD signal")?;
    check_len(p.len(), slow + signal, "MACD")?;
    let ef = ema(p, fast)?;
    let es = ema(p, slow)?;
    let offset = slow - fast;
    let line: Vec<T> = es.iter().zip(&ef[offset..]).map(|(&s, &f)| f - s).collect();
    let sig = ema(&line, signal)?;
    Ok((line, sig))
}

pub const FEATURE_NAMES: [&str; 11] = [
    "lag",
    "sma_5",
    "sma_10",
    "sma_20",
    "rsi_9",
    "rsi_14",
    "rsi_21",
    "bb_upper_10_2",
    "bb_lower_10_2",
    "macd_12_26",
    "macd_signal_9",
];

/// Index of the first price at which every indicator is defined.
pub const FEATURE_WARMUP: usize = 26 + 9 - 2;

/// Per-column location and scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Scaler<T: Real> {
    pub feature_mean: Vec<T>,
    pub feature_std: Vec<T>,
    pub target_mean: T,
    pub target_std: T,
}

impl<T: Real> Scaler<T> {
    /// Population moments of the given rows; zero-variance columns keep unit scale.
    pub fn fit(rows: &[Vec<T>], target: &[T]) -> Self {
        let n = T::from_usize_lossy(rows.len());
        let width = rows.first().map_or(0, Vec::len);
        let moments = |col: &dyn Fn(usize) -> T| {
            let m = (0..rows.len()).map(col).sum::<T>() / n;
            let v = (0..rows.len()).map(|i| (col(i) - m) * (col(i) - m)).sum::<T>() / n;
            let s = v.sqrt();
            (m, if s > T::zero() { s } else { T::one() })
        };
        let (feature_mean, feature_std) = (0..width).map(|j| moments(&|i| rows[i][j])).unzip();
        let (target_mean, target_std) = moments(&|i| target[i]);
        Self {
            feature_mean,
            feature_std,
            target_mean,
            target_std,
        }
    }

    pub fn transform_row(&self, row: &[T]) -> Vec<T> {
        row.iter()
            .zip(self.feature_mean.iter().zip(&self.feature_std))
            .map(|(&x, (&m, &s))| (x - m) / s)
            .collect()
    }

    pub fn transform_target(&self, y: T) -> T {
        (y - self.target_mean) / self.target_std
    }

    pub fn inverse_target(&self, z: T) -> T {
        z * self.target_std + self.target_mean
    }
}

/// Supervised rows: features known at the close of `dates[i]`, target is the
/// differenced value on the next trading date `target_dates[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FeatureMatrix<T: Real> {
    pub asset_id: String,
    pub names: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub target_dates: Vec<NaiveDate>,
    /// Raw (unscaled) feature rows.
    pub rows: Vec<Vec<T>>,
    /// Raw target values.
    pub target: Vec<T>,
    pub scaler: Scaler<T>,
    /// Number of leading rows whose target date lies inside the training window.
    pub n_train: usize,
}

impl<T: Real> FeatureMatrix<T> {
    /// Assembles a matrix from raw parts, fitting the scaler on the first `n_train` rows.
    pub fn from_parts(
        asset_id: impl Into<String>,
        names: Vec<String>,
        dates: Vec<NaiveDate>,
        target_dates: Vec<NaiveDate>,
        rows: Vec<Vec<T>>,
        target: Vec<T>,
        n_train: usize,
    ) -> Result<Self> {
        let n = rows.len();
        if dates.len() != n || target_dates.len() != n || target.len() != n {
            return Err(Error::Contract("feature matrix parts differ in length".into()));
        }
        if rows.iter().any(|r| r.len() != names.len()) {
            return Err(Error::Contract(
                "feature row width differs from column names".into(),
            ));
        }
        if n_train == 0 || n_train > n {
            return Err(Error::InsufficientData(format!(
                "{n_train} training rows requested from {n}"
            )));
        }
        let scaler = Scaler::fit(&rows[..n_train], &target[..n_train]);
        Ok(Self {
            asset_id: asset_id.into(),
            names,
            dates,
            target_dates,
            rows,
            target,
            scaler,
            n_train,
        })
    }

    /// Rows whose target date lies in `[from, to]`.
    pub fn rows_with_target_in(&self, from: NaiveDate, to: NaiveDate) -> std::ops::Range<usize> {
        let lo = self.target_dates.partition_point(|d| *d < from);
        let hi = self.target_dates.partition_point(|d| *d <= to);
        lo..hi.max(lo)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn scaled_rows(&self) -> Vec<Vec<T>> {
        self.rows.iter().map(|r| self.scaler.transform_row(r)).collect()
    }

    pub fn scaled_target(&self) -> Vec<T> {
        self.target
            .iter()
            .map(|&y| self.scaler.transform_target(y))
            .collect()
    }

    /// Index of the first row dated on or after `date`.
    pub fn row_at_or_after(&self, date: NaiveDate) -> usize {
        self.dates.partition_point(|d| *d < date)
    }

    /// `Date,target,<feature names>` with raw values.
    pub fn to_csv(&self) -> String {
        let mut s = format!("Date,target,{}\n", self.names.join(","));
        for ((d, y), row) in self.dates.iter().zip(&self.target).zip(&self.rows) {
            s.push_str(&d.format("%Y-%m-%d").to_string());
            s.push_str(&format!(",{y}"));
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Builds lagged-value plus indicator features from a differenced series and the prices
/// on its dates. Indicators use raw closes; the scaler is fitted on rows whose target
/// date lies in `[train_start, train_end]`.
pub fn build_features<T: Real>(
    diff: &DiffSeries<T>,
    prices: &PriceSeries<T>,
    split: &SplitSpec,
) -> Result<FeatureMatrix<T>> {
    let mut aligned = Vec::with_capacity(diff.len());
    let pd = prices.dates();
    for d in &diff.dates {
        match pd.binary_search(d) {
            Ok(i) => aligned.push(prices.close()[i]),
            Err(_) => {
                return Err(Error::Contract(format!(
                    "differenced series date {d} missing from prices"
                )))
            }
        }
    }
    let n = aligned.len();
    check_len(n, FEATURE_WARMUP + 2, "feature matrix")?;

    // each indicator vector is aligned to the tail; column value at price index t
    let tail = |v: Vec<T>| -> (usize, Vec<T>) { (n - v.len(), v) };
    let (bb_u, bb_l) = bbands(&aligned, 10, T::lit(2.0))?;
    let (m_line, m_sig) = macd(&aligned, 12, 26, 9)?;
    let cols: Vec<(usize, Vec<T>)> = vec![
        (0, diff.values.clone()),
        tail(sma(&aligned, 5)?),
        tail(sma(&aligned, 10)?),
        tail(sma(&aligned, 20)?),
        tail(rsi(&aligned, 9)?),
        tail(rsi(&aligned, 14)?),
        tail(rsi(&aligned, 21)?),
        tail(bb_u),
        tail(bb_l),
        tail(m_line),
        tail(m_sig),
    ];
    debug_assert_eq!(cols.iter().map(|c| c.0).max(), Some(FEATURE_WARMUP));

    let mut rows = Vec::with_capacity(n - FEATURE_WARMUP - 1);
    let mut dates = Vec::with_capacity(rows.capacity());
    let mut target_dates = Vec::with_capacity(rows.capacity());
    let mut target = Vec::with_capacity(rows.capacity());
    for t in FEATURE_WARMUP..n - 1 {
        rows.push(cols.iter().map(|(off, v)| v[t - off]).collect::<Vec<T>>());
        dates.push(diff.dates[t]);
        target_dates.push(diff.dates[t + 1]);
        target.push(diff.values[t + 1]);
    }

    let train: Vec<usize> = (0..rows.len())
        .filter(|&i| dates[i] >= split.train_start && target_dates[i] <= split.train_end)
        .collect();
    if train.is_empty() {
        return Err(Error::InsufficientData(
            "no training rows left after indicator warm-up".into(),
        ));
    }
    let n_train = train.len();
    debug_assert_eq!(train.last(), Some(&(n_train - 1 + train[0])));
    let train_rows: Vec<Vec<T>> = train.iter().map(|&i| rows[i].clone()).collect();
    let train_target: Vec<T> = train.iter().map(|&i| target[i]).collect();
    let scaler = Scaler::fit(&train_rows, &train_target);
    Ok(FeatureMatrix {
        asset_id: diff.asset_id.clone(),
        names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        dates,
        target_dates,
        rows,
        target,
        scaler,
        n_train: train[0] + n_train,
    })
}

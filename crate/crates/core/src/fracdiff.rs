//! Fixed-width-window fractional and tempered fractional differencing.
//!
//! Weights follow the recursion `w_0 = 1`, `w_k = -w_{k-1} (d - k + 1) / k`, with the
//! k-th term scaled by `exp(-k lambda)` in the tempered case. The expansion is truncated at the
//! first weight whose modulus drops below `tau`, which turns the operator into a
//! finite convolution of `window` terms.

use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::timeseries::LogSeries;

/// Truncation threshold used when none is given.
pub const DEFAULT_TAU: f64 = 1e-4;

/// Hard cap on the number of retained weights, whatever `tau` says.
pub const MAX_WEIGHTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffKind {
    Integer,
    Fractional,
    Tempered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DiffSpec<T: Real> {
    pub kind: DiffKind,
    pub d: T,
    /// Tempering rate; zero unless `kind` is `Tempered`.
    pub lambda: T,
    pub tau: T,
}

impl<T: Real> DiffSpec<T> {
    pub fn integer(order: u32) -> Self {
        Self {
            kind: DiffKind::Integer,
            d: T::from_u32(order).expect("small integer"),
            lambda: T::zero(),
            tau: T::lit(DEFAULT_TAU),
        }
    }

    pub fn fractional(d: T, tau: T) -> Result<Self> {
        let s = Self {
            kind: if d.fract() == T::zero() {
                DiffKind::Integer
            } else {
                DiffKind::Fractional
            },
            d,
            lambda: T::zero(),
            tau,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn tempered(d: T, lambda: T, tau: T) -> Result<Self> {
        let s = Self {
            kind: DiffKind::Tempered,
            d,
            lambda,
            tau,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d >= T::zero() && self.d.is_finite()) {
            return Err(Error::Domain(format!("differencing order {} < 0", self.d)));
        }
        if !(self.tau > T::zero() && self.tau < T::one()) {
            return Err(Error::Domain(format!("tau {} outside (0, 1)", self.tau)));
        }
        match self.kind {
            DiffKind::Integer if self.d.fract() != T::zero() => Err(Error::Domain(format!(
                "integer differencing with non-integer d {}",
                self.d
            ))),
            DiffKind::Tempered if !(self.lambda > T::zero() && self.lambda.is_finite()) => {
                Err(Error::Domain(format!(
                    "tempered differencing needs lambda > 0, got {}",
                    self.lambda
                )))
            }
            _ => Ok(()),
        }
    }

    /// Generates the truncated weights for this spec.
    pub fn weights(&self) -> Result<WeightVector<T>> {
        self.validate()?;
        Ok(match self.kind {
            DiffKind::Tempered => tempered_weights(self.d, self.lambda, self.tau),
            _ => frac_weights(self.d, self.tau),
        })
    }
}

/// Truncated differencing weights `w_0..=w_K` together with the spec that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WeightVector<T: Real> {
    weights: Vec<T>,
    spec: DiffSpec<T>,
}

impl<T: Real> WeightVector<T> {
    /// Wraps hand-made weights; `w_0` must be exactly one.
    pub fn from_weights(weights: Vec<T>, spec: DiffSpec<T>) -> Result<Self> {
        if weights.first() != Some(&T::one()) {
            return Err(Error::Contract("first weight must be exactly 1".into()));
        }
        Ok(Self { weights, spec })
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn spec(&self) -> &DiffSpec<T> {
        &self.spec
    }

    /// Number of retained weights, `K + 1`.
    pub fn window(&self) -> usize {
        self.weights.len()
    }
}

/// Fractional weights of `(1 - B)^d`.
pub fn frac_weights<T: Real>(d: T, tau: T) -> WeightVector<T> {
    let kind = if d.fract() == T::zero() {
        DiffKind::Integer
    } else {
        DiffKind::Fractional
    };
    let spec = DiffSpec {
        kind,
        d,
        lambda: T::zero(),
        tau,
    };
    WeightVector {
        weights: generate(d, T::zero(), tau),
        spec,
    }
}

/// Tempered fractional weights of `(1 - exp(-lambda) B)^d`.
///
/// `lambda = 0` yields exactly the fractional weights.
pub fn tempered_weights<T: Real>(d: T, lambda: T, tau: T) -> WeightVector<T> {
    if lambda == T::zero() {
        return frac_weights(d, tau);
    }
    let spec = DiffSpec {
        kind: DiffKind::Tempered,
        d,
        lambda,
        tau,
    };
    WeightVector {
        weights: generate(d, lambda, tau),
        spec,
    }
}

/// Runs the fractional recursion and scales the k-th term by `exp(-k lambda)`.
///
/// Scaling each term once keeps the tempered weights within one rounding of
/// `exp(-k lambda) * w_k^frac`; accumulating `exp(-lambda)` per step drifts by about
/// `k` ulps on long windows.
fn generate<T: Real>(d: T, lambda: T, tau: T) -> Vec<T> {
    let mut w = vec![T::one()];
    let mut frac = T::one();
    let mut k = 1usize;
    loop {
        let kf = T::from_usize_lossy(k);
        frac = -frac * (d - kf + T::one()) / kf;
        let next = if lambda == T::zero() {
            frac
        } else {
            frac * (-kf * lambda).exp()
        };
        if next == T::zero() || next.abs() < tau {
            break;
        }
        if w.len() == MAX_WEIGHTS {
            log::warn!("weight generation for d={d} hit the {MAX_WEIGHTS}-weight cap before |w_k| < {tau}");
            break;
        }
        w.push(next);
        k += 1;
    }
    w
}

/// Differenced series; `warmup` leading source observations produced no output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DiffSeries<T: Real> {
    pub asset_id: String,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<T>,
    pub spec: DiffSpec<T>,
    pub warmup: usize,
}

/// Sidecar record stored next to a serialized [`DiffSeries`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DiffMeta<T: Real> {
    pub asset_id: String,
    pub kind: DiffKind,
    pub d: T,
    pub lambda: T,
    pub tau: T,
    pub window: usize,
    pub warmup: usize,
}

impl<T: Real> DiffSeries<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn meta(&self) -> DiffMeta<T> {
        DiffMeta {
            asset_id: self.asset_id.clone(),
            kind: self.spec.kind,
            d: self.spec.d,
            lambda: self.spec.lambda,
            tau: self.spec.tau,
            window: self.warmup + 1,
            warmup: self.warmup,
        }
    }

    /// Drops leading rows so the series starts at `date` (or the first later date).
    pub fn starting_at(&self, date: NaiveDate) -> Self {
        let lo = self.dates.partition_point(|d| *d < date);
        Self {
            asset_id: self.asset_id.clone(),
            dates: self.dates[lo..].to_vec(),
            values: self.values[lo..].to_vec(),
            spec: self.spec,
            warmup: self.warmup + lo,
        }
    }

    /// `Date,Value` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "Date,Value")?;
        for (d, v) in self.dates.iter().zip(&self.values) {
            writeln!(out, "{},{}", d.format("%Y-%m-%d"), v)?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, meta: &DiffMeta<T>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut dates = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let date = rec
                .get(0)
                .and_then(|d| NaiveDate::parse_from_str(d, "%Y-%m-%d").ok())
                .ok_or_else(|| Error::Format(format!("bad date in diff row {rec:?}")))?;
            let value = rec
                .get(1)
                .and_then(|v| v.parse::<f64>().ok())
                .and_then(T::from_f64)
                .ok_or_else(|| Error::Format(format!("bad value in diff row {rec:?}")))?;
            dates.push(date);
            values.push(value);
        }
        Ok(Self {
            asset_id: meta.asset_id.clone(),
            dates,
            values,
            spec: DiffSpec {
                kind: meta.kind,
                d: meta.d,
                lambda: meta.lambda,
                tau: meta.tau,
            },
            warmup: meta.warmup,
        })
    }
}

/// Convolves raw values with the weights: `y_t = sum_k w_k x_{t-k}` for `t >= K`.
pub fn apply_weights<T: Real>(x: &[T], w: &[T]) -> Result<Vec<T>> {
    if w.is_empty() || x.len() < w.len() {
        return Err(Error::InsufficientData(format!(
            "series of length {} shorter than weight window {}",
            x.len(),
            w.len()
        )));
    }
    let k = w.len() - 1;
    Ok((k..x.len())
        .map(|t| w.iter().enumerate().map(|(j, &wj)| wj * x[t - j]).sum())
        .collect())
}

pub fn apply_diff<T: Real>(x: &LogSeries<T>, w: &WeightVector<T>) -> Result<DiffSeries<T>> {
    let values = apply_weights(x.values(), &w.weights)?;
    let warmup = w.window() - 1;
    Ok(DiffSeries {
        asset_id: x.asset_id().to_string(),
        dates: x.dates()[warmup..].to_vec(),
        values,
        spec: w.spec,
        warmup,
    })
}

/// Rebuilds the log levels from a differenced series and the `window - 1` levels
/// preceding its first date.
pub fn invert_diff<T: Real>(y: &DiffSeries<T>, w: &WeightVector<T>, history: &[T]) -> Result<LogSeries<T>> {
    if y.spec != w.spec {
        return Err(Error::Contract(format!(
            "weights built for {:?} but series differenced with {:?}",
            w.spec, y.spec
        )));
    }
    let levels = invert_weights(&y.values, &w.weights, history)?;
    LogSeries::new(y.asset_id.clone(), y.dates.clone(), levels)
}

/// Slice form of [`invert_diff`].
pub fn invert_weights<T: Real>(y: &[T], w: &[T], history: &[T]) -> Result<Vec<T>> {
    let k = w.len().saturating_sub(1);
    if history.len() != k {
        return Err(Error::Contract(format!(
            "inversion needs {k} history values, got {}",
            history.len()
        )));
    }
    let mut x: Vec<T> = Vec::with_capacity(k + y.len());
    x.extend_from_slice(history);
    for &yt in y {
        let t = x.len();
        let lagged: T = (1..=k).map(|j| w[j] * x[t - j]).sum();
        x.push(yt - lagged);
    }
    Ok(x.split_off(k))
}

/// Converts a one-step differenced forecast back into a price.
///
/// `recent_log_prices` are the last `window - 1` log levels, oldest first.
pub fn predict_price<T: Real>(pred_diff: T, w: &WeightVector<T>, recent_log_prices: &[T]) -> Result<T> {
    let k = w.window() - 1;
    if recent_log_prices.len() != k {
        return Err(Error::Contract(format!(
            "price reconstruction needs {k} recent log prices, got {}",
            recent_log_prices.len()
        )));
    }
    let n = recent_log_prices.len();
    let lagged: T = (1..=k).map(|j| w.weights[j] * recent_log_prices[n - j]).sum();
    Ok((pred_diff - lagged).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dates(n: usize) -> Vec<NaiveDate> {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        start.iter_days().take(n).collect()
    }

    fn spec_of(w: &[f64]) -> WeightVector<f64> {
        WeightVector::from_weights(
            w.to_vec(),
            DiffSpec {
                kind: DiffKind::Fractional,
                d: 0.5,
                lambda: 0.0,
                tau: 0.1,
            },
        )
        .unwrap()
    }

    #[test]
    fn first_order_weights() {
        assert_eq!(frac_weights(1.0, 1e-5).weights(), &[1.0, -1.0]);
        assert_eq!(frac_weights(1.0, 1e-5).spec().kind, DiffKind::Integer);
        assert_eq!(frac_weights(0.0, 1e-5).weights(), &[1.0]);
        assert_eq!(frac_weights(2.0, 1e-5).weights(), &[1.0, -2.0, 1.0]);
    }

    #[test]
    fn half_order_weights_truncate_at_tau() {
        let w = frac_weights(0.5, 0.05);
        assert_eq!(w.weights(), &[1.0, -0.5, -0.125, -0.0625]);
        assert_eq!(w.window(), 4);
    }

    #[test]
    fn tempered_examples() {
        let a = tempered_weights(0.5, 0.0, 0.05);
        assert_eq!(a.weights(), frac_weights(0.5, 0.05).weights());
        let b = tempered_weights(0.5, 0.1, 0.05);
        assert_relative_eq!(b.weights()[1], -0.5 * (-0.1f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(b.weights()[1], -0.452_418_7, epsilon = 1e-7);
        for d in [0.3, 0.9, 1.7] {
            assert_eq!(tempered_weights(d, 10.0, 0.05).weights(), &[1.0]);
        }
    }

    #[test]
    fn weights_of_fractional_order_below_one_are_negative() {
        let w = frac_weights(0.37, 1e-6);
        assert!(w.weights()[1..].iter().all(|&x| x < 0.0));
    }

    #[test]
    fn weight_cap_is_enforced() {
        let w = frac_weights(0.001, 1e-12);
        assert_eq!(w.window(), MAX_WEIGHTS);
    }

    #[test]
    fn spec_validation() {
        assert!(DiffSpec::<f64>::tempered(0.5, 0.0, 1e-4).is_err());
        assert!(DiffSpec::<f64>::fractional(0.5, 1.5).is_err());
        assert!(DiffSpec::<f64>::fractional(-0.5, 1e-4).is_err());
        assert_eq!(
            DiffSpec::<f64>::fractional(1.0, 1e-4).unwrap().kind,
            DiffKind::Integer
        );
    }

    #[test]
    fn apply_examples() {
        let (a, b, c) = (0.3, 1.7, -0.4);
        assert_eq!(
            apply_weights(&[a, b, c], &[1.0, -1.0]).unwrap(),
            vec![b - a, c - b]
        );
        assert_eq!(apply_weights(&[a, b, c], &[1.0]).unwrap(), vec![a, b, c]);
        assert_eq!(
            apply_weights(&[1.0, 2.0, 3.0, 4.0], &[1.0, -0.5, -0.125]).unwrap(),
            vec![1.875, 2.25]
        );
        assert!(matches!(
            apply_weights(&[1.0], &[1.0, -1.0]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn apply_diff_aligns_dates() {
        let x = LogSeries::new("a", dates(4), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let w = spec_of(&[1.0, -0.5, -0.125]);
        let y = apply_diff(&x, &w).unwrap();
        assert_eq!(y.dates, dates(4)[2..].to_vec());
        assert_eq!(y.warmup, 2);
        assert_eq!(y.values, vec![1.875, 2.25]);
    }

    #[test]
    fn invert_examples() {
        let (a, b, c) = (0.25, 1.5, -0.75);
        let x = invert_weights(&[b - a, c - b], &[1.0, -1.0], &[a]).unwrap();
        assert_eq!(x, vec![b, c]);
        let x = invert_weights(&[1.875, 2.25], &[1.0, -0.5, -0.125], &[1.0, 2.0]).unwrap();
        assert_eq!(x, vec![3.0, 4.0]);
        assert!(matches!(
            invert_weights(&[1.0], &[1.0, -0.5, -0.125], &[1.0]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn invert_diff_rejects_mismatched_spec() {
        let x = LogSeries::new("a", dates(4), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = apply_diff(&x, &frac_weights(1.0, 1e-5)).unwrap();
        let other = frac_weights(0.4, 1e-2);
        let hist = vec![0.0; other.window() - 1];
        assert!(matches!(invert_diff(&y, &other, &hist), Err(Error::Contract(_))));
    }

    #[test]
    fn predict_price_examples() {
        let l = 100f64.ln();
        let w = frac_weights(1.0, 1e-5);
        assert_relative_eq!(predict_price(0.01, &w, &[l]).unwrap(), (l + 0.01).exp());

        let w = spec_of(&[1.0, -0.5, -0.125]);
        let recent = [2f64.ln(), 3f64.ln()];
        let pred = 4f64.ln() - 0.5 * 3f64.ln() - 0.125 * 2f64.ln();
        assert_relative_eq!(
            predict_price(pred, &w, &recent).unwrap(),
            4.0,
            max_relative = 1e-12
        );
        assert!(matches!(
            predict_price(pred, &w, &recent[..1]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn predict_price_is_consistent_with_inversion() {
        let levels: Vec<f64> = (0..60).map(|i| 4.0 + 0.01 * (i as f64).sin()).collect();
        let w = frac_weights(0.46, 1e-3);
        let k = w.window() - 1;
        let y = apply_weights(&levels, w.weights()).unwrap();
        let last = levels.len() - 1;
        let p = predict_price(y[y.len() - 1], &w, &levels[last - k..last]).unwrap();
        assert_relative_eq!(p, levels[last].exp(), max_relative = 1e-9);
    }

    #[test]
    fn diff_series_csv_round_trip() {
        let x = LogSeries::new("a", dates(6), vec![1.0, 1.1, 1.3, 1.2, 1.25, 1.4]).unwrap();
        let y = apply_diff(&x, &frac_weights(0.5, 0.05)).unwrap();
        let mut buf = Vec::new();
        y.write_csv(&mut buf).unwrap();
        let meta_json = serde_json::to_string(&y.meta()).unwrap();
        let meta: DiffMeta<f64> = serde_json::from_str(&meta_json).unwrap();
        assert_eq!(meta.window, 4);
        let back = DiffSeries::read_csv(buf.as_slice(), &meta).unwrap();
        assert_eq!(back, y);
    }
}

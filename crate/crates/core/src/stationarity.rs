//! Augmented Dickey-Fuller testing and the search for the minimal stationarizing order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracdiff::{apply_weights, frac_weights, DEFAULT_TAU};
use crate::scalar::{mean, Real};
use crate::timeseries::LogSeries;

/// 5% critical value of the constant-only ADF regression.
pub const ADF_CRITICAL_5PCT: f64 = -2.86;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AdfResult<T: Real> {
    pub statistic: T,
    pub critical_value: T,
    pub lags: usize,
    pub n_obs: usize,
    pub stationary: bool,
}

/// ADF statistic with the default 5% critical value.
pub fn adf_stat<T: Real>(x: &[T], lags: usize) -> Result<AdfResult<T>> {
    adf_stat_with_critical(x, lags, T::lit(ADF_CRITICAL_5PCT))
}

/// Fits `dx_t = a + g x_{t-1} + sum_i b_i dx_{t-i} + e_t` by OLS and returns `g / se(g)`.
pub fn adf_stat_with_critical<T: Real>(x: &[T], lags: usize, critical: T) -> Result<AdfResult<T>> {
    let n = x.len();
    if n < lags + 20 {
        return Err(Error::InsufficientData(format!(
            "ADF with {lags} lags needs at least {} observations, got {n}",
            lags + 20
        )));
    }
    let dx: Vec<T> = x.windows(2).map(|w| w[1] - w[0]).collect();
    // regression rows t = lags+1 .. n-1 (indices into x)
    let n_obs = n - lags - 1;
    let p = lags + 1;
    let mut cols: Vec<Vec<T>> = Vec::with_capacity(p);
    cols.push((lags..n - 1).map(|t| x[t]).collect());
    for i in 1..=lags {
        cols.push((lags..n - 1).map(|t| dx[t - i]).collect());
    }
    let mut y: Vec<T> = (lags..n - 1).map(|t| dx[t]).collect();

    // Centring absorbs the intercept and keeps the normal equations well conditioned.
    let ym = mean(&y);
    y.iter_mut().for_each(|v| *v -= ym);
    for c in &mut cols {
        let m = mean(c);
        c.iter_mut().for_each(|v| *v -= m);
    }

    let level_ss: T = cols[0].iter().map(|v| *v * *v).sum();
    let level_scale: T = x.iter().map(|v| v.abs()).fold(T::zero(), T::max);
    if !(level_ss > T::epsilon() * T::from_usize_lossy(n_obs) * level_scale * level_scale)
        || level_ss == T::zero()
    {
        return Err(Error::Degenerate("lagged level is (nearly) constant".into()));
    }

    let mut xtx = vec![T::zero(); p * p];
    let mut xty = vec![T::zero(); p];
    for i in 0..p {
        for j in 0..=i {
            let v: T = cols[i].iter().zip(&cols[j]).map(|(a, b)| *a * *b).sum();
            xtx[i * p + j] = v;
            xtx[j * p + i] = v;
        }
        xty[i] = cols[i].iter().zip(&y).map(|(a, b)| *a * *b).sum();
    }
    let chol = cholesky(&xtx, p).ok_or_else(|| Error::Degenerate("singular ADF regressor matrix".into()))?;
    let beta = chol_solve(&chol, p, &xty);
    let rss: T = (0..n_obs)
        .map(|t| {
            let fit: T = (0..p).map(|i| beta[i] * cols[i][t]).sum();
            let r = y[t] - fit;
            r * r
        })
        .sum();
    let dof = n_obs as isize - p as isize - 1;
    if dof <= 0 {
        return Err(Error::InsufficientData("no residual degrees of freedom".into()));
    }
    let s2 = rss / T::from_usize_lossy(dof as usize);
    // (X'X)^{-1}_{00} via solving against the first unit vector
    let mut e0 = vec![T::zero(); p];
    e0[0] = T::one();
    let inv00 = chol_solve(&chol, p, &e0)[0];
    let se = (s2 * inv00).sqrt();
    if !(se > T::zero()) || !se.is_finite() {
        return Err(Error::Degenerate(
            "zero residual variance in ADF regression".into(),
        ));
    }
    let statistic = beta[0] / se;
    Ok(AdfResult {
        statistic,
        critical_value: critical,
        lags,
        n_obs,
        stationary: statistic < critical,
    })
}

fn cholesky<T: Real>(a: &[T], p: usize) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); p * p];
    let max_diag = (0..p).map(|i| a[i * p + i]).fold(T::zero(), T::max);
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if !(s > max_diag * T::lit(1e-13)) {
                    return None;
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    Some(l)
}

fn chol_solve<T: Real>(l: &[T], p: usize, b: &[T]) -> Vec<T> {
    let mut z = b.to_vec();
    for i in 0..p {
        for k in 0..i {
            let v = l[i * p + k] * z[k];
            z[i] -= v;
        }
        z[i] /= l[i * p + i];
    }
    for i in (0..p).rev() {
        for k in i + 1..p {
            let v = l[k * p + i] * z[k];
            z[i] -= v;
        }
        z[i] /= l[i * p + i];
    }
    z
}

/// Sample Pearson correlation.
pub fn pearson_corr<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Contract(format!(
            "correlation needs equal lengths >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == T::zero() || sbb == T::zero() {
        return Err(Error::Degenerate("zero variance in correlation input".into()));
    }
    let r = sab / (saa.sqrt() * sbb.sqrt());
    Ok(r.max(-T::one()).min(T::one()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SearchConfig<T: Real> {
    pub grid_start: T,
    pub grid_end: T,
    pub step: T,
    pub tau: T,
    pub lags: usize,
    pub critical_value: T,
}

impl<T: Real> Default for SearchConfig<T> {
    fn default() -> Self {
        Self {
            grid_start: T::zero(),
            grid_end: T::one(),
            step: T::lit(0.01),
            tau: T::lit(DEFAULT_TAU),
            lags: 1,
            critical_value: T::lit(ADF_CRITICAL_5PCT),
        }
    }
}

impl<T: Real> SearchConfig<T> {
    pub fn grid(&self) -> Vec<T> {
        let span = ((self.grid_end - self.grid_start) / self.step).to_f64_lossy();
        let count = (span + 1e-9).floor().max(0.0) as usize + 1;
        (0..count)
            .map(|i| self.grid_start + T::from_usize_lossy(i) * self.step)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SweepRow<T: Real> {
    pub d: T,
    pub adf_stat: T,
    pub pearson_corr: T,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DSearchResult<T: Real> {
    pub d_star: T,
    pub grid: Vec<SweepRow<T>>,
    pub tau: T,
    pub critical_value: T,
}

impl<T: Real> DSearchResult<T> {
    /// `d,adf_stat,pearson_corr` table.
    pub fn to_csv(&self) -> String {
        sweep_csv(&self.grid)
    }
}

pub fn sweep_csv<T: Real>(rows: &[SweepRow<T>]) -> String {
    let mut s = String::from("d,adf_stat,pearson_corr\n");
    for r in rows {
        s.push_str(&format!("{},{},{}\n", r.d, r.adf_stat, r.pearson_corr));
    }
    s
}

/// Evaluates one grid point; `None` when the weight window leaves too little data.
fn sweep_row<T: Real>(x: &[T], d: T, cfg: &SearchConfig<T>) -> Result<Option<SweepRow<T>>> {
    let w = frac_weights(d, cfg.tau);
    if w.window() + cfg.lags + 20 > x.len() {
        return Ok(None);
    }
    let y = apply_weights(x, w.weights())?;
    let adf = adf_stat_with_critical(&y, cfg.lags, cfg.critical_value)?;
    let corr = pearson_corr(&x[w.window() - 1..], &y)?;
    Ok(Some(SweepRow {
        d,
        adf_stat: adf.statistic,
        pearson_corr: corr,
        window: w.window(),
    }))
}

/// Sweeps the grid of `d` and returns the smallest one whose differenced series passes ADF.
///
/// Grid points whose weight window does not fit into the series are omitted from the table.
pub fn search_min_d<T: Real>(x: &LogSeries<T>, cfg: &SearchConfig<T>) -> Result<DSearchResult<T>> {
    let values = x.values();
    let rows: Vec<Option<SweepRow<T>>> = cfg
        .grid()
        .into_par_iter()
        .map(|d| sweep_row(values, d, cfg))
        .collect::<Result<_>>()?;
    let grid: Vec<SweepRow<T>> = rows.into_iter().flatten().collect();
    match grid.iter().find(|r| r.adf_stat < cfg.critical_value) {
        Some(r) => Ok(DSearchResult {
            d_star: r.d,
            tau: cfg.tau,
            critical_value: cfg.critical_value,
            grid,
        }),
        None => Err(Error::NoStationaryOrder {
            rows: grid
                .iter()
                .map(|r| {
                    (
                        r.d.to_f64_lossy(),
                        r.adf_stat.to_f64_lossy(),
                        r.pearson_corr.to_f64_lossy(),
                    )
                })
                .collect(),
        }),
    }
}

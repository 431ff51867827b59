//! Whittle estimation of ARFIMA(0,d,0) and ARTFIMA(0,d,lambda,0).

use serde::{Deserialize, Serialize};

use super::periodogram::{periodogram, Periodogram};
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::scalar::Real;

pub const MIN_WHITTLE_LEN: usize = 256;

/// Open bound on `|d|` for the stationary ARFIMA fit.
pub const ARFIMA_D_BOUND: f64 = 0.499;
pub const ARTFIMA_D_RANGE: (f64, f64) = (0.0, 3.0);
pub const ARTFIMA_LAMBDA_RANGE: (f64, f64) = (1e-6, 2.0);

const RESTARTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LongMemModel {
    Arfima,
    Artfima,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LongMemFit<T: Real> {
    pub model: LongMemModel,
    pub d_hat: T,
    pub lambda_hat: T,
    pub sigma2_hat: T,
    pub objective: T,
    pub converged: bool,
    pub n_restarts_used: usize,
}

impl<T: Real> LongMemFit<T> {
    /// One-line human readable report.
    pub fn report(&self) -> String {
        format!(
            "model={:?} d={:.4} lambda={:.6} sigma2={:.6e} objective={:.8} converged={}",
            self.model, self.d_hat, self.lambda_hat, self.sigma2_hat, self.objective, self.converged
        )
    }
}

/// Spectral shape of the tempered fractional operator,
/// `|1 - exp(-lambda) exp(-i omega)|^(-2d)`.
pub fn spectral_shape<T: Real>(omega: T, d: T, lambda: T) -> T {
    let a = (-lambda).exp();
    let s = (omega * T::lit(0.5)).sin();
    // (1-a)^2 + 4 a sin^2(omega/2) avoids cancellation near lambda = 0
    let base = (T::one() - a) * (T::one() - a) + T::lit(4.0) * a * s * s;
    base.powf(-d)
}

/// Profiled Whittle objective over a periodogram, with the matching innovation variance.
pub struct WhittleObjective<'a, T: Real> {
    pgram: &'a Periodogram<T>,
}

impl<'a, T: Real> WhittleObjective<'a, T> {
    pub fn new(pgram: &'a Periodogram<T>) -> Self {
        Self { pgram }
    }

    /// `(log sigma2_hat + mean log g, sigma2_hat)` with
    /// `sigma2_hat = (2 pi / m) sum_j I_j / g_j`.
    pub fn evaluate(&self, d: T, lambda: T) -> (T, T) {
        let m = T::from_usize_lossy(self.pgram.freqs.len());
        let mut ratio = T::zero();
        let mut log_g = T::zero();
        for (&w, &i) in self.pgram.freqs.iter().zip(&self.pgram.ordinates) {
            let g = spectral_shape(w, d, lambda);
            ratio += i / g;
            log_g += g.ln();
        }
        let sigma2 = T::TAU() * ratio / m;
        (sigma2.ln() + log_g / m, sigma2)
    }
}

pub fn whittle_fit<T: Real>(x: &[T], model: LongMemModel) -> Result<LongMemFit<T>> {
    if x.len() < MIN_WHITTLE_LEN {
        return Err(Error::InsufficientData(format!(
            "Whittle fit needs at least {MIN_WHITTLE_LEN} observations, got {}",
            x.len()
        )));
    }
    let pgram = periodogram(x)?;
    if pgram.ordinates.iter().all(|&v| v == T::zero()) {
        return Err(Error::Degenerate("series has no variation".into()));
    }
    let obj = WhittleObjective::new(&pgram);
    match model {
        LongMemModel::Arfima => fit_arfima(&obj),
        LongMemModel::Artfima => fit_artfima(&obj),
    }
}

struct Restart<T: Real> {
    x: Vec<T>,
    fx: T,
    converged: bool,
}

fn run_restarts<T: Real, F>(f: F, starts: &[Vec<T>], step: &[T]) -> Vec<Restart<T>>
where
    F: Fn(&[T]) -> T,
{
    let opts = NelderMeadOptions::default();
    starts
        .iter()
        .map(|s| {
            let r = nelder_mead(&f, s, step, &opts);
            debug_assert!(r.best_history.windows(2).all(|w| w[1] <= w[0]));
            Restart {
                x: r.x,
                fx: r.fx,
                converged: r.converged,
            }
        })
        .collect()
}

fn pick_best<T: Real>(runs: Vec<Restart<T>>) -> Result<(Restart<T>, bool, usize)> {
    let used = runs.len();
    let any_converged = runs.iter().any(|r| r.converged);
    let best = runs
        .into_iter()
        .filter(|r| r.fx.is_finite())
        .min_by(|a, b| a.fx.partial_cmp(&b.fx).unwrap_or(std::cmp::Ordering::Equal))
        .ok_or_else(|| Error::Fit {
            message: "objective non-finite at every restart".into(),
            params: vec![],
            objective: f64::INFINITY,
        })?;
    Ok((best, any_converged, used))
}

fn fit_arfima<T: Real>(obj: &WhittleObjective<'_, T>) -> Result<LongMemFit<T>> {
    let bound = T::lit(ARFIMA_D_BOUND);
    let f = |p: &[T]| {
        if p[0].abs() >= bound {
            T::infinity()
        } else {
            obj.evaluate(p[0], T::zero()).0
        }
    };
    let starts: Vec<Vec<T>> = [-0.4, -0.2, 0.0, 0.2, 0.4]
        .iter()
        .map(|&d| vec![T::lit(d)])
        .collect();
    let runs = run_restarts(f, &starts, &[T::lit(0.05)]);
    let (best, converged, used) = pick_best(runs)?;
    let d = best.x[0];
    let (objective, sigma2) = obj.evaluate(d, T::zero());
    Ok(LongMemFit {
        model: LongMemModel::Arfima,
        d_hat: d,
        lambda_hat: T::zero(),
        sigma2_hat: sigma2,
        objective,
        converged,
        n_restarts_used: used,
    })
}

fn fit_artfima<T: Real>(obj: &WhittleObjective<'_, T>) -> Result<LongMemFit<T>> {
    let (d_lo, d_hi) = (T::lit(ARTFIMA_D_RANGE.0), T::lit(ARTFIMA_D_RANGE.1));
    let (l_lo, l_hi) = (
        T::lit(ARTFIMA_LAMBDA_RANGE.0).ln(),
        T::lit(ARTFIMA_LAMBDA_RANGE.1).ln(),
    );
    // optimize over (d, ln lambda): the ridge towards lambda -> 0 is much better scaled
    let f = |p: &[T]| {
        if p[0] <= d_lo || p[0] >= d_hi || p[1] < l_lo || p[1] > l_hi {
            T::infinity()
        } else {
            obj.evaluate(p[0], p[1].exp()).0
        }
    };

    let mut grid: Vec<(T, Vec<T>)> = Vec::new();
    for &d in &[0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5] {
        for &l in &[1e-5, 1e-4, 1e-3, 1e-2, 0.05, 0.2, 1.0] {
            let p = vec![T::lit(d), T::lit(l).ln()];
            let v = f(&p);
            if v.is_finite() {
                grid.push((v, p));
            }
        }
    }
    grid.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let starts: Vec<Vec<T>> = grid.into_iter().take(RESTARTS).map(|g| g.1).collect();
    if starts.is_empty() {
        return Err(Error::Fit {
            message: "objective non-finite on the whole start grid".into(),
            params: vec![],
            objective: f64::INFINITY,
        });
    }
    let runs = run_restarts(f, &starts, &[T::lit(0.1), T::lit(0.5)]);
    let (best, converged, used) = pick_best(runs)?;
    let (d, lambda) = (best.x[0], best.x[1].exp());
    let (objective, sigma2) = obj.evaluate(d, lambda);
    Ok(LongMemFit {
        model: LongMemModel::Artfima,
        d_hat: d,
        lambda_hat: lambda,
        sigma2_hat: sigma2,
        objective,
        converged,
        n_restarts_used: used,
    })
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fracdiff::tempered_weights;
use crate::scalar::Real;

/// Truncation threshold of the AR weights used by [`simulate_longmem`].
pub const SIMULATION_TAU: f64 = 1e-7;

/// Seeded i.i.d. standard normal draws.
pub fn innovations<T: Real>(len: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| T::standard_normal(&mut rng)).collect()
}

/// Simulates ARTFIMA(0,d,lambda,0) (ARFIMA when `lambda = 0`) by solving
/// `x_t = z_t - sum_{k>=1} w_k x_{t-k}` with truncated (tempered) fractional weights.
///
/// The first `burn_in` values are discarded; `burn_in` must cover the `window - 1` lags.
pub fn simulate_longmem<T: Real>(d: T, lambda: T, n: usize, seed: u64, burn_in: usize) -> Result<Vec<T>> {
    if d < T::zero() || lambda < T::zero() {
        return Err(Error::Domain(format!(
            "simulation needs d >= 0 and lambda >= 0, got d={d} lambda={lambda}"
        )));
    }
    let w = tempered_weights(d, lambda, T::lit(SIMULATION_TAU));
    let lags = w.window() - 1;
    if burn_in < lags {
        return Err(Error::Contract(format!(
            "burn-in {burn_in} shorter than the {lags} AR lags"
        )));
    }
    let w = w.weights();
    let z: Vec<T> = innovations(n + burn_in, seed);
    let mut x: Vec<T> = Vec::with_capacity(z.len());
    for (t, &zt) in z.iter().enumerate() {
        let depth = lags.min(t);
        let ar: T = (1..=depth).map(|k| w[k] * x[t - k]).sum();
        x.push(zt - ar);
    }
    Ok(x.split_off(burn_in))
}

/// Burn-in that covers the truncated weight window of `(d, lambda)`.
pub fn default_burn_in<T: Real>(d: T, lambda: T) -> usize {
    tempered_weights(d, lambda, T::lit(SIMULATION_TAU)).window() - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_order_returns_innovations() {
        let x: Vec<f64> = simulate_longmem(0.0, 0.0, 500, 9, 0).unwrap();
        assert_eq!(x, innovations::<f64>(500, 9));
    }

    #[test]
    fn unit_order_is_a_random_walk() {
        let x: Vec<f64> = simulate_longmem(1.0, 0.0, 300, 4, 1).unwrap();
        let z = innovations::<f64>(301, 4);
        let mut acc = 0.0;
        let walk: Vec<f64> = z
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        for (a, b) in x.iter().zip(&walk[1..]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn burn_in_must_cover_lags() {
        assert!(matches!(
            simulate_longmem(0.4, 0.0, 100, 1, 3),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn arfima_lag_one_autocorrelation() {
        let d = 0.3;
        let x: Vec<f64> = simulate_longmem(d, 0.0, 8192, 17, default_burn_in(d, 0.0)).unwrap();
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let c0: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
        let c1: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
        let rho = c1 / c0;
        assert!((rho - d / (1.0 - d)).abs() < 0.05, "lag-1 acf {rho}");
    }
}

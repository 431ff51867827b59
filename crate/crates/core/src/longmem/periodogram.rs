use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{mean, Real};

pub const MIN_PERIODOGRAM_LEN: usize = 64;

/// Raw periodogram at the positive Fourier frequencies `2 pi j / n`, `j = 1..=(n-1)/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Periodogram<T: Real> {
    pub freqs: Vec<T>,
    pub ordinates: Vec<T>,
    /// Ordinate at frequency pi, present for even `n` only.
    pub nyquist: Option<T>,
    pub n: usize,
}

impl<T: Real> Periodogram<T> {
    /// `(2 pi / n)` times the sum over every nonzero Fourier frequency of both half-axes.
    /// Equals the (divisor `n`) sample variance.
    pub fn total_power(&self) -> T {
        let two_pi = T::TAU();
        let half: T = self.ordinates.iter().copied().sum();
        let nyq = self.nyquist.unwrap_or_else(T::zero);
        two_pi / T::from_usize_lossy(self.n) * (half + half + nyq)
    }
}

/// `I(w_j) = |sum_t x_t exp(-i w_j t)|^2 / (2 pi n)` of the demeaned series.
pub fn periodogram<T: Real>(x: &[T]) -> Result<Periodogram<T>> {
    let n = x.len();
    if n < MIN_PERIODOGRAM_LEN {
        return Err(Error::InsufficientData(format!(
            "periodogram needs at least {MIN_PERIODOGRAM_LEN} observations, got {n}"
        )));
    }
    let m = mean(x);
    let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v - m, T::zero())).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let nf = T::from_usize_lossy(n);
    let norm = T::TAU() * nf;
    let half = (n - 1) / 2;
    let freqs = (1..=half)
        .map(|j| T::TAU() * T::from_usize_lossy(j) / nf)
        .collect();
    let ordinates = buf[1..=half].iter().map(|c| c.norm_sqr() / norm).collect();
    let nyquist = n.is_multiple_of(2).then(|| buf[n / 2].norm_sqr() / norm);
    Ok(Periodogram {
        freqs,
        ordinates,
        nyquist,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn direct_dft_power(x: &[f64], j: usize) -> f64 {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let w = std::f64::consts::TAU * j as f64 / n;
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in x.iter().enumerate() {
            re += (v - m) * (w * t as f64).cos();
            im -= (v - m) * (w * t as f64).sin();
        }
        (re * re + im * im) / (std::f64::consts::TAU * n)
    }

    #[test]
    fn constant_series_has_zero_power() {
        let p = periodogram(&[2.5f64; 128]).unwrap();
        assert!(p.ordinates.iter().all(|&v| v == 0.0));
        assert_eq!(p.freqs.len(), 63);
    }

    #[test]
    fn cosine_concentrates_at_its_frequency() {
        let n = 256;
        let k = 17;
        let x: Vec<f64> = (0..n)
            .map(|t| (std::f64::consts::TAU * k as f64 * t as f64 / n as f64).cos())
            .collect();
        let p = periodogram(&x).unwrap();
        let peak = p.ordinates[k - 1];
        for (j, v) in p.ordinates.iter().enumerate() {
            if j != k - 1 {
                assert!(*v <= 1e-10 * peak, "leak at j={} : {v}", j + 1);
            }
        }
    }

    #[test]
    fn matches_direct_dft_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x: Vec<f64> = (0..4096).map(|_| f64::standard_normal(&mut rng)).collect();
        let p = periodogram(&x).unwrap();
        for j in [1, 2, 100, 1000, 2047] {
            let d = direct_dft_power(&x, j);
            assert!((p.ordinates[j - 1] - d).abs() <= 1e-9 * d.max(1e-3));
        }
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        let nyq = direct_dft_power(&x, 2048);
        assert!((p.nyquist.unwrap() - nyq).abs() < 1e-9);
        assert!((p.total_power() - var).abs() / var < 1e-8);
    }

    #[test]
    fn odd_length_and_short_input() {
        let x: Vec<f64> = (0..101).map(|t| ((t * 7919) % 13) as f64).collect();
        let p = periodogram(&x).unwrap();
        assert_eq!(p.freqs.len(), 50);
        assert!(p.nyquist.is_none());
        assert!(matches!(periodogram(&x[..63]), Err(Error::InsufficientData(_))));
    }
}

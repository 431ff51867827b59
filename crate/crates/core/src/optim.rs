//! Derivative-free minimization (Nelder-Mead downhill simplex).

use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions<T: Real> {
    pub max_iter: usize,
    /// Stop once the spread of objective values across the simplex falls below this.
    pub f_tol: T,
}

impl<T: Real> Default for NelderMeadOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 500,
            f_tol: T::lit(1e-8),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult<T: Real> {
    pub x: Vec<T>,
    pub fx: T,
    pub iterations: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub best_history: Vec<T>,
}

/// Minimizes `f` starting from a simplex spanned by `x0` and `x0 + step_i e_i`.
///
/// Infeasible points should evaluate to `+inf`; the simplex then contracts away from them.
pub fn nelder_mead<T: Real, F>(f: F, x0: &[T], step: &[T], opts: &NelderMeadOptions<T>) -> NelderMeadResult<T>
where
    F: Fn(&[T]) -> T,
{
    let n = x0.len();
    assert_eq!(step.len(), n, "one initial step per coordinate");
    let eval = |x: &[T]| {
        let v = f(x);
        if v.is_nan() {
            T::infinity()
        } else {
            v
        }
    };
    let half = T::lit(0.5);
    let two = T::lit(2.0);

    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step[i];
        let fx = eval(&x);
        simplex.push((x, fx));
    }

    let mut best_history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let (f_best, f_worst) = (simplex[0].1, simplex[n].1);
        if f_best.is_finite() && f_worst - f_best <= opts.f_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<T> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v.0[j]).sum::<T>() / T::from_usize_lossy(n))
            .collect();
        let along = |t: T| -> Vec<T> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(&c, &w)| c + t * (c - w))
                .collect()
        };

        let xr = along(T::one());
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(two);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(half);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-half);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let x: Vec<T> = best.iter().zip(&v.0).map(|(&b, &p)| b + half * (p - b)).collect();
                    let fx = eval(&x);
                    *v = (x, fx);
                }
            }
        }
        let best = simplex.iter().map(|v| v.1).fold(T::infinity(), T::min);
        best_history.push(best);
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (x, fx) = simplex.swap_remove(0);
    NelderMeadResult {
        x,
        fx,
        iterations,
        converged,
        best_history,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions {
            max_iter: 5000,
            f_tol: 1e-14,
        };
        let r = nelder_mead(rosen, &[-1.2, 1.0], &[0.1, 0.1], &opts);
        assert!(r.converged);
        assert!(
            (r.x[0] - 1.0).abs() < 1e-3 && (r.x[1] - 1.0).abs() < 1e-3,
            "{:?}",
            r.x
        );
        assert!(r.best_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn respects_infeasible_region() {
        // minimum of the unconstrained parabola lies at 1, feasible set is x < 0.5
        let f = |x: &[f64]| {
            if x[0] >= 0.5 {
                f64::INFINITY
            } else {
                (x[0] - 1.0).powi(2)
            }
        };
        let r = nelder_mead(f, &[0.0], &[0.1], &NelderMeadOptions::default());
        assert!(r.x[0] < 0.5 && r.x[0] > 0.49, "{:?}", r.x);
    }

    #[test]
    fn one_dimensional_quadratic() {
        let r = nelder_mead(
            |x: &[f32]| (x[0] - 3.0) * (x[0] - 3.0),
            &[0.0],
            &[1.0],
            &NelderMeadOptions::default(),
        );
        assert!((r.x[0] - 3.0).abs() < 1e-3);
    }
}

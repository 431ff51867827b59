use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::{fit, window_mse, FitRows};
use super::{Architecture, LstmNetwork, TrainConfig};
use crate::error::{Error, Result};
use crate::indicators::FeatureMatrix;
use crate::scalar::Real;

/// Search ranges. Pairs are inclusive bounds; `l2_rate` and `learning_rate` are drawn
/// log-uniformly, the dropout rates uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperSpace {
    pub layers: Vec<usize>,
    pub cells: Vec<usize>,
    pub dropout: (f64, f64),
    pub recurrent_dropout: (f64, f64),
    pub l2_rate: (f64, f64),
    pub learning_rate: (f64, f64),
    pub batch_size: Vec<usize>,
    pub epochs: (usize, usize),
    pub lookback: usize,
    pub early_stop_patience: Option<usize>,
}

impl Default for HyperSpace {
    fn default() -> Self {
        Self {
            layers: vec![1, 2],
            cells: vec![16, 32, 64],
            dropout: (0.0, 0.4),
            recurrent_dropout: (0.0, 0.4),
            l2_rate: (1e-6, 1e-3),
            learning_rate: (1e-4, 1e-2),
            batch_size: vec![16, 32, 64],
            epochs: (50, 300),
            lookback: 10,
            early_stop_patience: None,
        }
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi == 0.0 {
        return 0.0;
    }
    let (a, b) = (lo.ln(), hi.ln());
    if a == b {
        lo
    } else {
        rng.random_range(a..b).exp()
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn pick<R: Rng + ?Sized>(rng: &mut R, xs: &[usize]) -> usize {
    xs[rng.random_range(0..xs.len())]
}

impl HyperSpace {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Contract(format!("hyperparameter space: {m}")));
        if self.layers.is_empty() || self.cells.is_empty() || self.batch_size.is_empty() {
            return bad("empty choice list");
        }
        if self.layers.contains(&0) || self.cells.contains(&0) || self.batch_size.contains(&0) {
            return bad("zero layers, cells or batch size");
        }
        for (name, (lo, hi)) in [
            ("dropout", self.dropout),
            ("recurrent dropout", self.recurrent_dropout),
        ] {
            if !(0.0 <= lo && lo <= hi && hi < 1.0) {
                return bad(&format!("{name} range [{lo}, {hi}]"));
            }
        }
        let (lo, hi) = self.l2_rate;
        if !(hi == 0.0 || (0.0 < lo && lo <= hi)) {
            return bad(&format!(
                "log-uniform L2 range [{lo}, {hi}] needs positive bounds"
            ));
        }
        let (lo, hi) = self.learning_rate;
        if !(0.0 < lo && lo <= hi) {
            return bad(&format!("learning rate range [{lo}, {hi}]"));
        }
        if self.epochs.0 > self.epochs.1 || self.lookback == 0 {
            return bad("epoch range or lookback");
        }
        Ok(())
    }

    /// One independent draw; the seed is assigned per trial by the search.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Candidate {
        let layers = pick(rng, &self.layers);
        let cells = pick(rng, &self.cells);
        let architecture = Architecture {
            hidden: vec![cells; layers],
            dropout: uniform(rng, self.dropout),
            recurrent_dropout: uniform(rng, self.recurrent_dropout),
        };
        let config = TrainConfig {
            lookback: self.lookback,
            batch_size: pick(rng, &self.batch_size),
            epochs: rng.random_range(self.epochs.0..=self.epochs.1),
            learning_rate: log_uniform(rng, self.learning_rate),
            l2_rate: log_uniform(rng, self.l2_rate),
            seed: 0,
            early_stop_patience: self.early_stop_patience,
        };
        Candidate { architecture, config }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub architecture: Architecture,
    pub config: TrainConfig,
}

/// Window end rows for tuning: fit on `train`, score on `val`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TuneRows {
    pub train: Range<usize>,
    pub val: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub candidate: Candidate,
    pub param_count: usize,
    pub val_loss: Option<f64>,
    pub epochs_run: usize,
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn log_line(&self) -> String {
        let a = &self.candidate.architecture;
        let c = &self.candidate.config;
        let outcome = match (&self.val_loss, &self.error) {
            (Some(v), _) => format!("val_mse={v:.6e}"),
            (None, Some(e)) => format!("failed: {e}"),
            (None, None) => "failed".into(),
        };
        format!(
            "trial {} hidden={:?} dropout={:.3} rec_dropout={:.3} batch={} epochs={} lr={:.3e} l2={:.3e} params={} {outcome}",
            self.index,
            a.hidden,
            a.dropout,
            a.recurrent_dropout,
            c.batch_size,
            c.epochs,
            c.learning_rate,
            c.l2_rate,
            self.param_count
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_index: usize,
    pub best: Candidate,
    pub trials: Vec<TrialRecord>,
}

/// Seed of trial `index` under search seed `seed`.
pub fn derive_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random search: `budget` seeded draws from `space`, see [`tune_candidates`].
pub fn tune<T: Real>(
    fm: &FeatureMatrix<T>,
    rows: &TuneRows,
    space: &HyperSpace,
    budget: usize,
    seed: u64,
) -> Result<TuneResult> {
    space.validate()?;
    if budget == 0 {
        return Err(Error::Contract("tuning budget must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates = (0..budget).map(|_| space.draw(&mut rng)).collect();
    tune_candidates(fm, rows, candidates, seed)
}

/// Trains every candidate (concurrently, trial `i` seeded with `derive_seed(seed, i)`) and
/// returns the lowest validation MSE, ties going to fewer parameters and then earlier trials.
pub fn tune_candidates<T: Real>(
    fm: &FeatureMatrix<T>,
    rows: &TuneRows,
    candidates: Vec<Candidate>,
    seed: u64,
) -> Result<TuneResult> {
    if candidates.is_empty() {
        return Err(Error::Contract("no tuning candidates".into()));
    }
    let trials: Vec<TrialRecord> = candidates
        .into_par_iter()
        .enumerate()
        .map(|(index, mut candidate)| {
            candidate.config.seed = derive_seed(seed, index);
            let param_count = candidate.architecture.param_count(fm.width());
            let (val_loss, epochs_run, error) = match run_trial(fm, rows, &candidate) {
                Ok((v, e)) => (Some(v), e, None),
                Err(e) => (None, 0, Some(e.to_string())),
            };
            TrialRecord {
                index,
                candidate,
                param_count,
                val_loss,
                epochs_run,
                error,
            }
        })
        .collect();
    for t in &trials {
        log::debug!("{}", t.log_line());
    }

    let best = select_best(&trials).cloned();
    match best {
        Some(t) => Ok(TuneResult {
            best_index: t.index,
            best: t.candidate,
            trials,
        }),
        None => Err(Error::Tuning {
            log: trials.iter().map(TrialRecord::log_line).collect(),
        }),
    }
}

/// Lowest finite validation loss; ties go to fewer parameters, then to the earlier trial.
fn select_best(trials: &[TrialRecord]) -> Option<&TrialRecord> {
    trials
        .iter()
        .filter_map(|t| t.val_loss.filter(|v| v.is_finite()).map(|v| (v, t)))
        .min_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.param_count.cmp(&b.1.param_count))
                .then(a.1.index.cmp(&b.1.index))
        })
        .map(|(_, t)| t)
}

fn run_trial<T: Real>(fm: &FeatureMatrix<T>, rows: &TuneRows, c: &Candidate) -> Result<(f64, usize)> {
    let net = LstmNetwork::init(fm.width(), &c.architecture, c.config.seed)?;
    let fit_rows = FitRows {
        train: rows.train.clone(),
        val: Some(rows.val.clone()),
    };
    let (net, history) = fit(&net, fm, &fit_rows, &c.config)?;
    let lb = c.config.lookback;
    let ends: Vec<usize> = (rows.val.start.max(lb - 1)..rows.val.end).collect();
    if ends.is_empty() {
        return Err(Error::InsufficientData("no validation windows".into()));
    }
    let x = {
        let r = fm.scaled_rows();
        ndarray::Array2::from_shape_fn((r.len(), fm.width()), |(i, j)| r[i][j])
    };
    let v = window_mse(&net, &x, &fm.scaled_target(), &ends, lb)?.to_f64_lossy();
    if !v.is_finite() {
        return Err(Error::Numeric("non-finite validation loss".into()));
    }
    Ok((v, history.epochs_run()))
}

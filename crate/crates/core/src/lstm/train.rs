use std::ops::Range;

use chrono::NaiveDate;
use ndarray::{s, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cell::{backward, draw_masks, forward_batch};
use super::{Architecture, LstmNetwork, LstmParams, TrainConfig};
use crate::error::{Error, Result};
use crate::indicators::{FeatureMatrix, Scaler};
use crate::scalar::Real;

const PREDICT_CHUNK: usize = 512;

/// Adam with `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
#[derive(Debug, Clone)]
pub struct Adam<T: Real> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    step: i32,
    m: LstmParams<T>,
    v: LstmParams<T>,
}

impl<T: Real> Adam<T> {
    pub fn new(params: &LstmParams<T>, learning_rate: T) -> Self {
        Self {
            learning_rate,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn update(&mut self, params: &mut LstmParams<T>, grads: &LstmParams<T>) {
        self.step += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.step);
        let c2 = one - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.eps);
        let g = grads.slices();
        for (((p, m), v), (g, _)) in params
            .slices_mut()
            .into_iter()
            .zip(self.m.slices_mut())
            .zip(self.v.slices_mut())
            .zip(g)
        {
            for k in 0..p.len() {
                m[k] = b1 * m[k] + (one - b1) * g[k];
                v[k] = b2 * v[k] + (one - b2) * g[k] * g[k];
                p[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
            }
        }
    }
}

/// Rows (indices into a feature matrix) used as window end points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FitRows {
    pub train: Range<usize>,
    pub val: Option<Range<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct History<T: Real> {
    /// Mean training objective (MSE plus L2 penalty) over the epoch's mini-batches.
    pub train_loss: Vec<T>,
    /// Inference-mode MSE on the validation windows after each epoch.
    pub val_loss: Vec<Option<T>>,
    /// Epoch whose parameters were returned, when early stopping restored them.
    pub best_epoch: Option<usize>,
}

impl<T: Real> History<T> {
    fn as_pairs(&self) -> Vec<(f64, Option<f64>)> {
        self.train_loss
            .iter()
            .zip(&self.val_loss)
            .map(|(t, v)| (t.to_f64_lossy(), v.map(Real::to_f64_lossy)))
            .collect()
    }

    pub fn epochs_run(&self) -> usize {
        self.train_loss.len()
    }
}

fn scaled_matrix<T: Real>(fm: &FeatureMatrix<T>) -> Array2<T> {
    let rows = fm.scaled_rows();
    Array2::from_shape_fn((rows.len(), fm.width()), |(i, j)| rows[i][j])
}

fn window_ends(rows: &Range<usize>, lookback: usize) -> Vec<usize> {
    (rows.start.max(lookback - 1)..rows.end).collect()
}

fn window<T: Real>(x: &Array2<T>, end: usize, lookback: usize) -> ArrayView2<'_, T> {
    x.slice(s![end + 1 - lookback..=end, ..])
}

/// Inference-mode predictions (in scaled units) for windows ending at `ends`.
pub fn predict_windows<T: Real>(
    net: &LstmNetwork<T>,
    x: &Array2<T>,
    ends: &[usize],
    lookback: usize,
) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(ends.len());
    for chunk in ends.chunks(PREDICT_CHUNK) {
        let views: Vec<_> = chunk.iter().map(|&e| window(x, e, lookback)).collect();
        out.extend(forward_batch(net, &views, None)?.predictions);
    }
    Ok(out)
}

/// Inference-mode MSE against scaled targets for windows ending at `ends`.
pub fn window_mse<T: Real>(
    net: &LstmNetwork<T>,
    x: &Array2<T>,
    y: &[T],
    ends: &[usize],
    lookback: usize,
) -> Result<T> {
    let pred = predict_windows(net, x, ends, lookback)?;
    let n = T::from_usize_lossy(ends.len());
    Ok(pred
        .iter()
        .zip(ends)
        .map(|(&p, &e)| (p - y[e]) * (p - y[e]))
        .sum::<T>()
        / n)
}

/// Mini-batch Adam training on windows ending at `rows.train`; fully determined by `cfg.seed`.
pub fn fit<T: Real>(
    net: &LstmNetwork<T>,
    fm: &FeatureMatrix<T>,
    rows: &FitRows,
    cfg: &TrainConfig,
) -> Result<(LstmNetwork<T>, History<T>)> {
    cfg.validate()?;
    net.check()?;
    if net.input_dim() != fm.width() {
        return Err(Error::Contract(format!(
            "network expects {} features, matrix has {}",
            net.input_dim(),
            fm.width()
        )));
    }
    let lb = cfg.lookback;
    if rows.train.end > fm.len() || rows.val.as_ref().is_some_and(|v| v.end > fm.len()) {
        return Err(Error::Contract("fit rows exceed the feature matrix".into()));
    }
    if rows.train.len() < lb + 1 {
        return Err(Error::InsufficientData(format!(
            "{} training rows for lookback {lb}",
            rows.train.len()
        )));
    }
    let x = scaled_matrix(fm);
    let y = fm.scaled_target();
    let mut train_ends = window_ends(&rows.train, lb);
    let val_ends = rows
        .val
        .as_ref()
        .map(|v| window_ends(v, lb))
        .filter(|v| !v.is_empty());

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = net.clone();
    let mut adam = Adam::new(&net.params, T::lit(cfg.learning_rate));
    let l2 = T::lit(cfg.l2_rate);
    let dropout = net.dropout_rate > T::zero() || net.recurrent_dropout_rate > T::zero();
    let mut history = History {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: None,
    };
    let mut best: Option<(T, usize, LstmNetwork<T>)> = None;

    for epoch in 0..cfg.epochs {
        train_ends.shuffle(&mut rng);
        let mut total = T::zero();
        for batch in train_ends.chunks(cfg.batch_size) {
            let views: Vec<_> = batch.iter().map(|&e| window(&x, e, lb)).collect();
            let targets: Vec<T> = batch.iter().map(|&e| y[e]).collect();
            let masks = dropout.then(|| draw_masks(&net, batch.len(), &mut rng));
            let (loss, grads) = match backward(&net, &views, &targets, masks.as_ref(), l2) {
                Ok(r) => r,
                Err(Error::Numeric(_)) => {
                    return Err(Error::Training {
                        history: history.as_pairs(),
                    })
                }
                Err(e) => return Err(e),
            };
            adam.update(&mut net.params, &grads);
            total += loss * T::from_usize_lossy(batch.len());
        }
        let train_loss = total / T::from_usize_lossy(train_ends.len());
        let val_loss = match &val_ends {
            Some(v) => match window_mse(&net, &x, &y, v, lb) {
                Ok(l) => Some(l),
                Err(Error::Numeric(_)) => Some(T::infinity()),
                Err(e) => return Err(e),
            },
            None => None,
        };
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        if !train_loss.is_finite() || val_loss.is_some_and(|v| !v.is_finite()) || !net.params.all_finite() {
            return Err(Error::Training {
                history: history.as_pairs(),
            });
        }

        if let (Some(patience), Some(v)) = (cfg.early_stop_patience, val_loss) {
            match &best {
                Some((b, _, _)) if v >= *b => {}
                _ => best = Some((v, epoch, net.clone())),
            }
            let best_epoch = best.as_ref().map_or(epoch, |b| b.1);
            if epoch - best_epoch >= patience {
                break;
            }
        }
    }
    if let Some((_, epoch, best_net)) = best {
        net = best_net;
        history.best_epoch = Some(epoch);
    }
    Ok((net, history))
}

/// One-step-ahead predictions for every window lying inside `rows`, keyed by the date being
/// predicted and de-standardized with the matrix scaler.
pub fn predict_series<T: Real>(
    net: &LstmNetwork<T>,
    fm: &FeatureMatrix<T>,
    rows: Range<usize>,
    lookback: usize,
) -> Result<Vec<(NaiveDate, T)>> {
    if lookback == 0 || rows.end > fm.len() {
        return Err(Error::Contract("invalid prediction rows or lookback".into()));
    }
    if rows.len() < lookback {
        return Err(Error::InsufficientData(format!(
            "{} rows cannot fill a window of {lookback}",
            rows.len()
        )));
    }
    let x = scaled_matrix(fm);
    let ends: Vec<usize> = (rows.start + lookback - 1..rows.end).collect();
    let pred = predict_windows(net, &x, &ends, lookback)?;
    Ok(ends
        .iter()
        .zip(pred)
        .map(|(&e, p)| (fm.target_dates[e], fm.scaler.inverse_target(p)))
        .collect())
}

/// Everything needed to reproduce a trained model's predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Checkpoint<T: Real> {
    pub asset_id: String,
    pub feature_names: Vec<String>,
    pub architecture: Architecture,
    pub train_config: TrainConfig,
    pub scaler: Scaler<T>,
    pub network: LstmNetwork<T>,
}

impl<T: Real> Checkpoint<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.network.check()?;
        Ok(c)
    }
}

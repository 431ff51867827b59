//! Stacked LSTM regression network written against `ndarray`, trained by backpropagation
//! through time.
//!
//! Gate blocks are stored stacked in the order forget, input, candidate, output: rows
//! `g*H..(g+1)*H` of `w_v`, `w_h` and `b` belong to gate `g`.

mod cell;
mod train;
mod tune;

pub use cell::{
    backward, cell_step, draw_masks, forward, forward_batch, gradient_check, loss, DropoutMasks,
    ForwardCache, Mode, StepCache,
};
pub use train::{fit, predict_series, predict_windows, window_mse, Adam, Checkpoint, FitRows, History};
pub use tune::{
    derive_seed, tune, tune_candidates, Candidate, HyperSpace, TrialRecord, TuneResult, TuneRows,
};

use ndarray::{s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const GATES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Forget = 0,
    Input = 1,
    Candidate = 2,
    Output = 3,
}

/// Weights of one LSTM layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LstmCellParams<T: Real> {
    /// `4H x I` input weights.
    pub w_v: Array2<T>,
    /// `4H x H` recurrent weights.
    pub w_h: Array2<T>,
    /// `4H` biases.
    pub b: Array1<T>,
}

impl<T: Real> LstmCellParams<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_v: Array2::zeros((GATES * hidden, input)),
            w_h: Array2::zeros((GATES * hidden, hidden)),
            b: Array1::zeros(GATES * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.ncols()
    }

    pub fn input(&self) -> usize {
        self.w_v.ncols()
    }

    pub fn gate_input_weights(&self, g: Gate) -> ndarray::ArrayView2<'_, T> {
        let h = self.hidden();
        self.w_v.slice(s![g as usize * h..(g as usize + 1) * h, ..])
    }

    pub fn gate_recurrent_weights(&self, g: Gate) -> ndarray::ArrayView2<'_, T> {
        let h = self.hidden();
        self.w_h.slice(s![g as usize * h..(g as usize + 1) * h, ..])
    }

    pub fn gate_bias(&self, g: Gate) -> ndarray::ArrayView1<'_, T> {
        let h = self.hidden();
        self.b.slice(s![g as usize * h..(g as usize + 1) * h])
    }

    pub fn check(&self) -> Result<()> {
        let h = self.hidden();
        if self.w_v.nrows() != GATES * h || self.w_h.nrows() != GATES * h || self.b.len() != GATES * h {
            return Err(Error::Contract(format!(
                "inconsistent gate shapes: w_v {:?}, w_h {:?}, b {}",
                self.w_v.dim(),
                self.w_h.dim(),
                self.b.len()
            )));
        }
        Ok(())
    }
}

/// Every trainable tensor of a network; also used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LstmParams<T: Real> {
    pub layers: Vec<LstmCellParams<T>>,
    pub head_w: Array1<T>,
    pub head_b: T,
}

impl<T: Real> LstmParams<T> {
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| LstmCellParams::zeros(l.input(), l.hidden()))
                .collect(),
            head_w: Array1::zeros(self.head_w.len()),
            head_b: T::zero(),
        }
    }

    /// Flat views of every tensor, each flagged `true` when it is a weight (L2-penalized).
    pub fn slices(&self) -> Vec<(&[T], bool)> {
        let mut out = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &self.layers {
            out.push((l.w_v.as_slice().expect("standard layout"), true));
            out.push((l.w_h.as_slice().expect("standard layout"), true));
            out.push((l.b.as_slice().expect("standard layout"), false));
        }
        out.push((self.head_w.as_slice().expect("standard layout"), true));
        out.push((std::slice::from_ref(&self.head_b), false));
        out
    }

    /// Mutable flat views in the order of [`LstmParams::slices`].
    pub fn slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &mut self.layers {
            out.push(l.w_v.as_slice_mut().expect("standard layout"));
            out.push(l.w_h.as_slice_mut().expect("standard layout"));
            out.push(l.b.as_slice_mut().expect("standard layout"));
        }
        out.push(self.head_w.as_slice_mut().expect("standard layout"));
        out.push(std::slice::from_mut(&mut self.head_b));
        out
    }

    pub fn count(&self) -> usize {
        self.slices().iter().map(|s| s.0.len()).sum()
    }

    pub fn sum_sq_weights(&self) -> T {
        self.slices()
            .iter()
            .filter(|s| s.1)
            .flat_map(|s| s.0.iter())
            .map(|&w| w * w)
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.0.iter().all(|v| v.is_finite()))
    }
}

/// Layer sizes and dropout rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub recurrent_dropout: f64,
}

impl Architecture {
    pub fn new(hidden: Vec<usize>, dropout: f64, recurrent_dropout: f64) -> Result<Self> {
        let a = Self {
            hidden,
            dropout,
            recurrent_dropout,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Contract(format!(
                "every layer needs at least one cell: {:?}",
                self.hidden
            )));
        }
        for (name, p) in [
            ("dropout", self.dropout),
            ("recurrent dropout", self.recurrent_dropout),
        ] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Contract(format!("{name} rate {p} outside [0, 1)")));
            }
        }
        Ok(())
    }

    /// Trainable parameter count for `input` features.
    pub fn param_count(&self, input: usize) -> usize {
        let mut n = 0;
        let mut i = input;
        for &h in &self.hidden {
            n += GATES * h * (i + h + 1);
            i = h;
        }
        n + i + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LstmNetwork<T: Real> {
    pub params: LstmParams<T>,
    pub dropout_rate: T,
    pub recurrent_dropout_rate: T,
}

impl<T: Real> LstmNetwork<T> {
    /// Network with every parameter zero.
    pub fn zeros(input: usize, arch: &Architecture) -> Result<Self> {
        arch.validate()?;
        if input == 0 {
            return Err(Error::Contract("network needs at least one input feature".into()));
        }
        let mut layers = Vec::with_capacity(arch.hidden.len());
        let mut i = input;
        for &h in &arch.hidden {
            layers.push(LstmCellParams::zeros(i, h));
            i = h;
        }
        Ok(Self {
            params: LstmParams {
                layers,
                head_w: Array1::zeros(i),
                head_b: T::zero(),
            },
            dropout_rate: T::lit(arch.dropout),
            recurrent_dropout_rate: T::lit(arch.recurrent_dropout),
        })
    }

    /// Glorot-uniform input weights, orthogonal recurrent blocks, forget bias 1, other biases 0.
    pub fn init(input: usize, arch: &Architecture, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(input, arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut net.params.layers {
            let (h, i) = (layer.hidden(), layer.input());
            let limit = T::lit((6.0 / (i + GATES * h) as f64).sqrt());
            layer.w_v.mapv_inplace(|_| T::uniform(&mut rng, -limit, limit));
            for g in 0..GATES {
                let q = random_orthogonal::<T, _>(h, &mut rng);
                layer.w_h.slice_mut(s![g * h..(g + 1) * h, ..]).assign(&q);
            }
            layer.b.slice_mut(s![0..h]).fill(T::one());
        }
        let h = net.params.head_w.len();
        let limit = T::lit((6.0 / (h + 1) as f64).sqrt());
        net.params
            .head_w
            .mapv_inplace(|_| T::uniform(&mut rng, -limit, limit));
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.params.layers[0].input()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.params.layers.iter().map(LstmCellParams::hidden).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    pub fn check(&self) -> Result<()> {
        let mut i = self.input_dim();
        for l in &self.params.layers {
            l.check()?;
            if l.input() != i {
                return Err(Error::Contract(format!(
                    "layer expects {} inputs but receives {i}",
                    l.input()
                )));
            }
            i = l.hidden();
        }
        if self.params.head_w.len() != i {
            return Err(Error::Contract(format!(
                "head expects {} inputs but last layer has {i} cells",
                self.params.head_w.len()
            )));
        }
        Ok(())
    }
}

/// `n x n` orthogonal matrix from Gram-Schmidt on Gaussian rows.
fn random_orthogonal<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Array2<T> {
    loop {
        let mut q = Array2::<T>::zeros((n, n));
        q.mapv_inplace(|_| T::standard_normal(rng));
        let mut ok = true;
        for i in 0..n {
            for j in 0..i {
                let proj = q.row(i).dot(&q.row(j));
                let rj = q.row(j).to_owned();
                q.row_mut(i).scaled_add(-proj, &rj);
            }
            let norm = q.row(i).dot(&q.row(i)).sqrt();
            if norm < T::lit(1e-6) {
                ok = false;
                break;
            }
            q.row_mut(i).mapv_inplace(|v| v / norm);
        }
        if ok {
            return q;
        }
    }
}

/// Optimization settings of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lookback: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2_rate: f64,
    pub seed: u64,
    pub early_stop_patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lookback: 10,
            batch_size: 32,
            epochs: 100,
            learning_rate: 1e-3,
            l2_rate: 0.0,
            seed: 0,
            early_stop_patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lookback == 0 || self.batch_size == 0 {
            return Err(Error::Contract("lookback and batch size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Contract(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.l2_rate >= 0.0) {
            return Err(Error::Contract(format!("negative L2 rate {}", self.l2_rate)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_shapes_and_conventions() {
        let arch = Architecture::new(vec![5, 3], 0.1, 0.2).unwrap();
        let net: LstmNetwork<f64> = LstmNetwork::init(4, &arch, 7).unwrap();
        net.check().unwrap();
        assert_eq!(net.param_count(), arch.param_count(4));
        assert_eq!(net.hidden_sizes(), vec![5, 3]);
        let l0 = &net.params.layers[0];
        assert!(l0.gate_bias(Gate::Forget).iter().all(|&b| b == 1.0));
        assert!(l0.b.slice(s![5..]).iter().all(|&b| b == 0.0));
        let limit = (6.0f64 / (4 + 20) as f64).sqrt();
        assert!(l0.w_v.iter().all(|w| w.abs() <= limit));
        for g in [Gate::Forget, Gate::Input, Gate::Candidate, Gate::Output] {
            let q = l0.gate_recurrent_weights(g);
            let qqt = q.dot(&q.t());
            for i in 0..5 {
                for j in 0..5 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((qqt[[i, j]] - want).abs() < 1e-12);
                }
            }
        }
        assert_eq!(LstmNetwork::<f64>::init(4, &arch, 7).unwrap(), net);
        assert_ne!(LstmNetwork::<f64>::init(4, &arch, 8).unwrap(), net);
    }

    #[test]
    fn invalid_configurations() {
        assert!(Architecture::new(vec![], 0.0, 0.0).is_err());
        assert!(Architecture::new(vec![4], 1.0, 0.0).is_err());
        assert!(Architecture::new(vec![4], 0.0, -0.1).is_err());
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            lookback: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}

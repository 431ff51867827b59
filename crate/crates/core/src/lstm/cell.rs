use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LstmCellParams, LstmNetwork, LstmParams, GATES};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Gate activations of one time step, one row per sequence in the batch.
#[derive(Debug, Clone)]
pub struct StepCache<T: Real> {
    pub forget: Array2<T>,
    pub input: Array2<T>,
    pub candidate: Array2<T>,
    pub output: Array2<T>,
    pub state: Array2<T>,
    pub tanh_state: Array2<T>,
}

#[derive(Debug, Clone)]
struct LayerStep<T: Real> {
    /// Masked layer input.
    x: Array2<T>,
    /// Masked previous output.
    h_prev: Array2<T>,
    s_prev: Array2<T>,
    gates: StepCache<T>,
}

/// Per-sequence dropout masks, one row per sequence, already scaled by `1 / keep`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks<T: Real> {
    pub input: Vec<Array2<T>>,
    pub recurrent: Vec<Array2<T>>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache<T: Real> {
    steps: Vec<Vec<LayerStep<T>>>,
    last_h: Array2<T>,
    pub predictions: Array1<T>,
}

fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn step_batch<T: Real>(
    p: &LstmCellParams<T>,
    x: &Array2<T>,
    h_prev: &Array2<T>,
    s_prev: &Array2<T>,
) -> (Array2<T>, StepCache<T>) {
    let hd = p.hidden();
    let z = x.dot(&p.w_v.t()) + h_prev.dot(&p.w_h.t()) + &p.b;
    let block = |g: usize| z.slice(s![.., g * hd..(g + 1) * hd]);
    let forget = block(0).mapv(sigmoid);
    let input = block(1).mapv(sigmoid);
    let candidate = block(2).mapv(T::tanh);
    let output = block(3).mapv(sigmoid);
    let state = &forget * s_prev + &input * &candidate;
    let tanh_state = state.mapv(T::tanh);
    let h = &output * &tanh_state;
    (
        h,
        StepCache {
            forget,
            input,
            candidate,
            output,
            state,
            tanh_state,
        },
    )
}

/// One memory-cell update for a single sequence.
pub fn cell_step<T: Real>(
    p: &LstmCellParams<T>,
    v: ArrayView1<'_, T>,
    h_prev: ArrayView1<'_, T>,
    s_prev: ArrayView1<'_, T>,
) -> Result<(Array1<T>, Array1<T>, StepCache<T>)> {
    p.check()?;
    let hd = p.hidden();
    if v.len() != p.input() || h_prev.len() != hd || s_prev.len() != hd {
        return Err(Error::Contract(format!(
            "cell expects input {} and state {hd}, got {}, {}, {}",
            p.input(),
            v.len(),
            h_prev.len(),
            s_prev.len()
        )));
    }
    let row = |a: ArrayView1<'_, T>| a.insert_axis(Axis(0)).to_owned();
    let (h, cache) = step_batch(p, &row(v), &row(h_prev), &row(s_prev));
    if h.iter().chain(cache.state.iter()).any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite cell output".into()));
    }
    Ok((h.row(0).to_owned(), cache.state.row(0).to_owned(), cache))
}

fn check_batch<T: Real>(net: &LstmNetwork<T>, windows: &[ArrayView2<'_, T>]) -> Result<usize> {
    net.check()?;
    let first = windows
        .first()
        .ok_or_else(|| Error::Contract("empty batch".into()))?;
    let (lookback, features) = first.dim();
    if lookback == 0 {
        return Err(Error::Contract("window has no time steps".into()));
    }
    if features != net.input_dim() {
        return Err(Error::Contract(format!(
            "window has {features} features, network expects {}",
            net.input_dim()
        )));
    }
    if windows.iter().any(|w| w.dim() != (lookback, features)) {
        return Err(Error::Contract("windows in a batch differ in shape".into()));
    }
    Ok(lookback)
}

fn mask_matrix<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rate: T, rng: &mut R) -> Array2<T> {
    if rate == T::zero() {
        return Array2::ones((rows, cols));
    }
    let keep = T::one() - rate;
    let scale = T::one() / keep;
    Array2::from_shape_simple_fn((rows, cols), || {
        if T::uniform(rng, T::zero(), T::one()) < keep {
            scale
        } else {
            T::zero()
        }
    })
}

/// Draws one input and one recurrent mask per layer and sequence.
pub fn draw_masks<T: Real, R: Rng + ?Sized>(
    net: &LstmNetwork<T>,
    batch: usize,
    rng: &mut R,
) -> DropoutMasks<T> {
    let mut input = Vec::new();
    let mut recurrent = Vec::new();
    for l in &net.params.layers {
        input.push(mask_matrix(batch, l.input(), net.dropout_rate, rng));
        recurrent.push(mask_matrix(batch, l.hidden(), net.recurrent_dropout_rate, rng));
    }
    DropoutMasks { input, recurrent }
}

/// Runs every window of the batch through the network; `masks = None` is inference.
pub fn forward_batch<T: Real>(
    net: &LstmNetwork<T>,
    windows: &[ArrayView2<'_, T>],
    masks: Option<&DropoutMasks<T>>,
) -> Result<ForwardCache<T>> {
    let lookback = check_batch(net, windows)?;
    let batch = windows.len();
    let mut seq: Vec<Array2<T>> = (0..lookback)
        .map(|t| {
            let mut x = Array2::zeros((batch, net.input_dim()));
            for (b, w) in windows.iter().enumerate() {
                x.row_mut(b).assign(&w.row(t));
            }
            x
        })
        .collect();

    let mut steps = Vec::with_capacity(net.params.layers.len());
    for (l, p) in net.params.layers.iter().enumerate() {
        let hd = p.hidden();
        let mut h = Array2::zeros((batch, hd));
        let mut s_prev = Array2::zeros((batch, hd));
        let mut layer_steps = Vec::with_capacity(lookback);
        let mut out = Vec::with_capacity(lookback);
        for x_raw in &seq {
            let (x, h_prev) = match masks {
                Some(m) => (x_raw * &m.input[l], &h * &m.recurrent[l]),
                None => (x_raw.clone(), h.clone()),
            };
            let (h_new, gates) = step_batch(p, &x, &h_prev, &s_prev);
            let s_new = gates.state.clone();
            layer_steps.push(LayerStep {
                x,
                h_prev,
                s_prev: std::mem::replace(&mut s_prev, s_new),
                gates,
            });
            h = h_new;
            out.push(h.clone());
        }
        steps.push(layer_steps);
        seq = out;
    }
    let last_h = seq.pop().expect("lookback >= 1");
    let predictions = last_h.dot(&net.params.head_w) + net.params.head_b;
    if predictions.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numeric("non-finite network output".into()));
    }
    Ok(ForwardCache {
        steps,
        last_h,
        predictions,
    })
}

/// Single-window prediction. Train mode draws dropout masks from `seed`.
pub fn forward<T: Real>(
    net: &LstmNetwork<T>,
    window: ArrayView2<'_, T>,
    mode: Mode,
    seed: u64,
) -> Result<(T, ForwardCache<T>)> {
    let masks = match mode {
        Mode::Train => Some(draw_masks(net, 1, &mut ChaCha8Rng::seed_from_u64(seed))),
        Mode::Infer => None,
    };
    let cache = forward_batch(net, &[window], masks.as_ref())?;
    Ok((cache.predictions[0], cache))
}

/// `mean (pred - y)^2 + l2 * sum W^2` without gradients.
pub fn loss<T: Real>(
    net: &LstmNetwork<T>,
    windows: &[ArrayView2<'_, T>],
    targets: &[T],
    masks: Option<&DropoutMasks<T>>,
    l2: T,
) -> Result<T> {
    let cache = forward_batch(net, windows, masks)?;
    Ok(data_loss(&cache.predictions, targets)? + l2 * net.params.sum_sq_weights())
}

fn data_loss<T: Real>(pred: &Array1<T>, targets: &[T]) -> Result<T> {
    if pred.len() != targets.len() {
        return Err(Error::Contract(format!(
            "{} windows but {} targets",
            pred.len(),
            targets.len()
        )));
    }
    let n = T::from_usize_lossy(targets.len());
    Ok(pred
        .iter()
        .zip(targets)
        .map(|(&p, &y)| (p - y) * (p - y))
        .sum::<T>()
        / n)
}

/// Loss and its gradient with respect to every parameter, by backpropagation through time.
pub fn backward<T: Real>(
    net: &LstmNetwork<T>,
    windows: &[ArrayView2<'_, T>],
    targets: &[T],
    masks: Option<&DropoutMasks<T>>,
    l2: T,
) -> Result<(T, LstmParams<T>)> {
    let cache = forward_batch(net, windows, masks)?;
    let loss = data_loss(&cache.predictions, targets)? + l2 * net.params.sum_sq_weights();

    let n = T::from_usize_lossy(targets.len());
    let dpred: Array1<T> = cache
        .predictions
        .iter()
        .zip(targets)
        .map(|(&p, &y)| T::lit(2.0) * (p - y) / n)
        .collect();

    let mut grads = net.params.zeros_like();
    grads.head_w = cache.last_h.t().dot(&dpred);
    grads.head_b = dpred.sum();

    let lookback = windows[0].nrows();
    let batch = windows.len();
    let one = T::one();
    // gradient arriving from the layer above at every time step
    let top_h = net.params.head_w.len();
    let mut from_above: Vec<Array2<T>> = vec![Array2::zeros((batch, top_h)); lookback];
    from_above[lookback - 1] = dpred
        .view()
        .insert_axis(Axis(1))
        .dot(&net.params.head_w.view().insert_axis(Axis(0)));

    for (l, p) in net.params.layers.iter().enumerate().rev() {
        let hd = p.hidden();
        let g = &mut grads.layers[l];
        let mut dh_rec = Array2::<T>::zeros((batch, hd));
        let mut ds_next = Array2::<T>::zeros((batch, hd));
        let mut to_below: Vec<Array2<T>> = Vec::with_capacity(lookback);
        let mut dz = Array2::<T>::zeros((batch, GATES * hd));
        for t in (0..lookback).rev() {
            let st = &cache.steps[l][t];
            let c = &st.gates;
            let dh = &from_above[t] + &dh_rec;
            let d_out = &dh * &c.tanh_state;
            let ds = &ds_next + &(&dh * &c.output * &c.tanh_state.mapv(|v| one - v * v));
            let d_forget = &ds * &st.s_prev;
            let d_input = &ds * &c.candidate;
            let d_cand = &ds * &c.input;
            ds_next = &ds * &c.forget;

            dz.slice_mut(s![.., 0..hd])
                .assign(&(&d_forget * &c.forget.mapv(|f| f * (one - f))));
            dz.slice_mut(s![.., hd..2 * hd])
                .assign(&(&d_input * &c.input.mapv(|i| i * (one - i))));
            dz.slice_mut(s![.., 2 * hd..3 * hd])
                .assign(&(&d_cand * &c.candidate.mapv(|v| one - v * v)));
            dz.slice_mut(s![.., 3 * hd..4 * hd])
                .assign(&(&d_out * &c.output.mapv(|o| o * (one - o))));

            g.w_v += &dz.t().dot(&st.x);
            g.w_h += &dz.t().dot(&st.h_prev);
            g.b += &dz.sum_axis(Axis(0));

            let mut dx = dz.dot(&p.w_v);
            let mut dhp = dz.dot(&p.w_h);
            if let Some(m) = masks {
                dx *= &m.input[l];
                dhp *= &m.recurrent[l];
            }
            to_below.push(dx);
            dh_rec = dhp;
        }
        to_below.reverse();
        from_above = to_below;
    }

    if l2 != T::zero() {
        let two_l2 = T::lit(2.0) * l2;
        let weights: Vec<bool> = net.params.slices().iter().map(|s| s.1).collect();
        let values: Vec<Vec<T>> = net.params.slices().iter().map(|s| s.0.to_vec()).collect();
        for ((gs, w), is_weight) in grads.slices_mut().into_iter().zip(values).zip(weights) {
            if is_weight {
                for (gv, wv) in gs.iter_mut().zip(w) {
                    *gv += two_l2 * wv;
                }
            }
        }
    }
    if !loss.is_finite() || !grads.all_finite() {
        return Err(Error::Numeric("non-finite loss or gradient".into()));
    }
    Ok((loss, grads))
}

/// Largest relative deviation `|a - n| / max(|a|, |n|, 1e-6)` between the BPTT gradient `a`
/// and the central finite difference `n` over every parameter.
pub fn gradient_check<T: Real>(
    net: &LstmNetwork<T>,
    windows: &[ArrayView2<'_, T>],
    targets: &[T],
    masks: Option<&DropoutMasks<T>>,
    l2: T,
    eps: T,
) -> Result<T> {
    let (_, analytic) = backward(net, windows, targets, masks, l2)?;
    let analytic: Vec<Vec<T>> = analytic.slices().iter().map(|s| s.0.to_vec()).collect();
    let mut probe = net.clone();
    let floor = T::lit(1e-6);
    let mut worst = T::zero();
    for (j, a_slice) in analytic.iter().enumerate() {
        for (k, &a) in a_slice.iter().enumerate() {
            let orig = probe.params.slices_mut()[j][k];
            probe.params.slices_mut()[j][k] = orig + eps;
            let up = loss(&probe, windows, targets, masks, l2)?;
            probe.params.slices_mut()[j][k] = orig - eps;
            let down = loss(&probe, windows, targets, masks, l2)?;
            probe.params.slices_mut()[j][k] = orig;
            let numeric = (up - down) / (eps + eps);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

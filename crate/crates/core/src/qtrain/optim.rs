use crate::error::{shape_err, Error, Result};
use crate::qcore::{Algebra, Tensor};
use crate::rng::{unit, QRng};

/// Squared-gradient accumulators, one per real parameter component.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RmsPropState {
    accum: Vec<Vec<f64>>,
}

impl RmsPropState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accumulators(&self) -> &[Vec<f64>] {
        &self.accum
    }
}

/// One RMSprop update, independently per real component:
/// `v ← decay·v + (1−decay)·g²`, `p ← p − lr·g / (√v + eps)`.
pub fn rmsprop_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    state: &mut RmsPropState,
    lr: f64,
    decay: f64,
    eps: f64,
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(shape_err(format!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    if state.accum.is_empty() {
        state.accum = params.iter().map(|p| vec![0.0; p.real_len()]).collect();
    }
    if state.accum.len() != params.len() {
        return Err(shape_err("optimizer state does not mirror the parameters"));
    }
    for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut state.accum) {
        p.expect_same_shape(g, "rmsprop gradient")?;
        if v.len() != p.real_len() {
            return Err(shape_err("optimizer state does not mirror the parameters"));
        }
        for ((w, &gi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(v.iter_mut()) {
            *vi = decay * *vi + (1.0 - decay) * gi * gi;
            *w -= lr * gi / (vi.sqrt() + eps);
        }
    }
    Ok(())
}

/// Learning rate after an epoch: multiplied by `factor` when the best
/// validation loss of the last `patience` epochs is no better than the best
/// before them.
pub fn anneal(lr: f64, val_history: &[f64], factor: f64, patience: usize) -> f64 {
    let patience = patience.max(1);
    if val_history.len() <= patience {
        return lr;
    }
    let split = val_history.len() - patience;
    let best_before = val_history[..split].iter().copied().fold(f64::INFINITY, f64::min);
    let best_recent = val_history[split..].iter().copied().fold(f64::INFINITY, f64::min);
    if best_recent < best_before {
        lr
    } else {
        lr * factor
    }
}

/// Inverted-dropout mask of shape `rows × cols` in `algebra`. A dropped
/// element zeroes all of its components; kept ones are scaled by `1/(1−rate)`.
pub fn dropout_mask(algebra: Algebra, rows: usize, cols: usize, rate: f64, rng: &mut QRng) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} not in [0, 1)")));
    }
    let mut mask = Tensor::zeros(algebra, rows, cols);
    if rate == 0.0 {
        mask.data_mut().iter_mut().for_each(|v| *v = 1.0);
        return Ok(mask);
    }
    let keep = 1.0 / (1.0 - rate);
    let n = rows * cols;
    for idx in 0..n {
        let v = if unit(rng) >= rate { keep } else { 0.0 };
        for p in 0..algebra.dim() {
            mask.plane_mut(p)[idx] = v;
        }
    }
    Ok(mask)
}

/// Rescales gradients so their global L2 norm is at most `max_norm`; returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grads.iter().map(Tensor::norm_squared).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }
    norm
}

//! Quaternion backpropagation through time.
//!
//! For a product `Y = W ⊗ X` with upstream gradient `G = ∂E/∂Y` (each entry
//! holding the four component partials as a quaternion), the parameter and
//! input gradients are
//!
//! ```text
//! ∂E/∂W = G ⊗ Xᴴ        ∂E/∂X = Wᴴ ⊗ G
//! ```
//!
//! where `ᴴ` transposes and conjugates every entry. The output weights thus
//! pick up `δ ⊗ h*` and the recurrent chain propagates `W_hh* ⊗ δ` scaled
//! component-wise by `α'` of the pre-activation. Biases see an all-ones input
//! and collect the column sums of `δ`. For real tensors `ᴴ` is the plain
//! transpose and everything reduces to ordinary BPTT.

use crate::error::{shape_err, Result};
use crate::qcore::{qmatmul, qmatmul_acc, Tensor};
use crate::qnet::{
    DenseLayer, ForwardCache, Layer, LayerTrace, LstmCell, LstmStep, Model, Recurrent, RnnCell,
    RnnStep, CANDIDATE, FORGET, INPUT, OUTPUT,
};
use crate::qtrain::{sequence_loss, LossKind, Targets};

/// Gradients mirroring [`Model::params`] entry by entry.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub names: Vec<String>,
    pub grads: Vec<Tensor>,
    /// `∂L/∂x_t` for each input step, in the inputs' algebra.
    pub inputs: Option<Vec<Tensor>>,
}

impl GradientSet {
    pub fn zeros_like(model: &Model) -> Self {
        let params = model.params();
        Self {
            names: params.iter().map(|(n, _)| n.clone()).collect(),
            grads: params
                .iter()
                .map(|(_, t)| Tensor::zeros(t.algebra(), t.rows(), t.cols()))
                .collect(),
            inputs: None,
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.grads[i])
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().all(Tensor::is_finite)
    }

    pub fn global_norm(&self) -> f64 {
        self.grads.iter().map(Tensor::norm_squared).sum::<f64>().sqrt()
    }
}

fn acc_product(dst: &mut Tensor, a: &Tensor, b: &Tensor) -> Result<()> {
    qmatmul_acc(dst, a, b)
}

fn d_preact(upstream: &Tensor, preact: &Tensor, act: crate::qcore::Activation) -> Tensor {
    upstream.zip_map(preact, |g, p| g * act.derivative(p))
}

fn dense_backward(layer: &DenseLayer, steps: &[crate::qnet::DenseStep], d_out: &[Tensor]) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
    let mut dw = Tensor::zeros(layer.w.algebra(), layer.w.rows(), layer.w.cols());
    let mut db = layer.b.as_ref().map(|b| Tensor::zeros(b.algebra(), b.rows(), 1));
    let w_h = layer.w.conj_transpose();
    let mut d_x = Vec::with_capacity(steps.len());
    for (s, g) in steps.iter().zip(d_out) {
        let delta = d_preact(g, &s.preact, layer.activation);
        acc_product(&mut dw, &delta, &s.x.conj_transpose())?;
        if let Some(db) = &mut db {
            db.add_assign(&delta.sum_columns());
        }
        d_x.push(qmatmul(&w_h, &delta)?);
    }
    let mut grads = vec![dw];
    grads.extend(db);
    Ok((grads, d_x))
}

/// Backward through one direction of an RNN. `d_h[k]` is the gradient on the
/// hidden state emitted at processing step `k`.
fn rnn_cell_backward(cell: &RnnCell, steps: &[RnnStep], d_h: &[Tensor]) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
    let alg = cell.algebra();
    let mut dw_x = Tensor::zeros(alg, cell.w_x.rows(), cell.w_x.cols());
    let mut dw_h = Tensor::zeros(alg, cell.w_h.rows(), cell.w_h.cols());
    let mut db = cell.b.as_ref().map(|b| Tensor::zeros(alg, b.rows(), 1));
    let w_x_h = cell.w_x.conj_transpose();
    let w_h_h = cell.w_h.conj_transpose();
    let mut d_x = vec![Tensor::zeros(alg, 0, 0); steps.len()];
    let mut carry: Option<Tensor> = None;
    for k in (0..steps.len()).rev() {
        let s = &steps[k];
        let mut dh = d_h[k].clone();
        if let Some(c) = &carry {
            dh.add_assign(c);
        }
        let delta = d_preact(&dh, &s.preact, cell.activation);
        acc_product(&mut dw_x, &delta, &s.x.conj_transpose())?;
        acc_product(&mut dw_h, &delta, &s.h_prev.conj_transpose())?;
        if let Some(db) = &mut db {
            db.add_assign(&delta.sum_columns());
        }
        d_x[k] = qmatmul(&w_x_h, &delta)?;
        carry = Some(qmatmul(&w_h_h, &delta)?);
    }
    let mut grads = vec![dw_x, dw_h];
    grads.extend(db);
    Ok((grads, d_x))
}

fn lstm_cell_backward(cell: &LstmCell, steps: &[LstmStep], d_h: &[Tensor]) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
    let alg = cell.algebra();
    let mut dw: [Tensor; 4] = std::array::from_fn(|g| Tensor::zeros(alg, cell.w[g].rows(), cell.w[g].cols()));
    let mut dr: [Tensor; 4] = std::array::from_fn(|g| Tensor::zeros(alg, cell.r[g].rows(), cell.r[g].cols()));
    let mut db: Option<[Tensor; 4]> = cell
        .b
        .as_ref()
        .map(|b| std::array::from_fn(|g| Tensor::zeros(alg, b[g].rows(), 1)));
    let w_h: [Tensor; 4] = std::array::from_fn(|g| cell.w[g].conj_transpose());
    let r_h: [Tensor; 4] = std::array::from_fn(|g| cell.r[g].conj_transpose());

    let mut d_x = vec![Tensor::zeros(alg, 0, 0); steps.len()];
    let mut carry_h: Option<Tensor> = None;
    let mut carry_c: Option<Tensor> = None;
    for k in (0..steps.len()).rev() {
        let s = &steps[k];
        let mut dh = d_h[k].clone();
        if let Some(c) = &carry_h {
            dh.add_assign(c);
        }
        let [f, i, o, g] = &s.gates;
        // h = o × tanh(c)
        let d_o = dh.hadamard(&s.tanh_c);
        let mut dc = dh.hadamard(o).zip_map(&s.tanh_c, |v, t| v * (1.0 - t * t));
        if let Some(c) = &carry_c {
            dc.add_assign(c);
        }
        // c = f × c_prev + i × g
        let d_f = dc.hadamard(&s.c_prev);
        let d_i = dc.hadamard(g);
        let d_g = dc.hadamard(i);
        carry_c = Some(dc.hadamard(f));

        let mut deltas: [Tensor; 4] = std::array::from_fn(|_| Tensor::zeros(alg, 0, 0));
        deltas[FORGET] = d_f.zip_map(f, |d, s| d * s * (1.0 - s));
        deltas[INPUT] = d_i.zip_map(i, |d, s| d * s * (1.0 - s));
        deltas[OUTPUT] = d_o.zip_map(o, |d, s| d * s * (1.0 - s));
        deltas[CANDIDATE] = d_g.zip_map(g, |d, t| d * (1.0 - t * t));

        let x_h = s.x.conj_transpose();
        let h_prev_h = s.h_prev.conj_transpose();
        let mut dx = Tensor::zeros(alg, s.x.rows(), s.x.cols());
        let mut dh_prev = Tensor::zeros(alg, s.h_prev.rows(), s.h_prev.cols());
        for gate in 0..4 {
            let delta = &deltas[gate];
            acc_product(&mut dw[gate], delta, &x_h)?;
            acc_product(&mut dr[gate], delta, &h_prev_h)?;
            if let Some(db) = &mut db {
                db[gate].add_assign(&delta.sum_columns());
            }
            acc_product(&mut dx, &w_h[gate], delta)?;
            acc_product(&mut dh_prev, &r_h[gate], delta)?;
        }
        d_x[k] = dx;
        carry_h = Some(dh_prev);
    }
    let mut grads: Vec<Tensor> = dw.into_iter().collect();
    grads.extend(dr);
    if let Some(db) = db {
        grads.extend(db);
    }
    Ok((grads, d_x))
}

/// Shared bidirectional plumbing: splits `d_out` between directions and sums input gradients.
fn recurrent_backward<C, S>(
    layer: &Recurrent<C>,
    forward: &[S],
    backward: Option<&Vec<S>>,
    units: usize,
    d_out: &[Tensor],
    cell_backward: impl Fn(&C, &[S], &[Tensor]) -> Result<(Vec<Tensor>, Vec<Tensor>)>,
) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
    match (&layer.backward, backward) {
        (None, None) => cell_backward(&layer.forward, forward, d_out),
        (Some(bcell), Some(bsteps)) => {
            let t_len = d_out.len();
            let d_fwd: Vec<Tensor> = d_out.iter().map(|g| g.slice_rows(0, units)).collect();
            let d_bwd: Vec<Tensor> = (0..t_len)
                .map(|k| d_out[t_len - 1 - k].slice_rows(units, units))
                .collect();
            let (mut grads, mut d_x) = cell_backward(&layer.forward, forward, &d_fwd)?;
            let (bgrads, bdx) = cell_backward(bcell, bsteps, &d_bwd)?;
            grads.extend(bgrads);
            for (k, g) in bdx.into_iter().enumerate() {
                d_x[t_len - 1 - k].add_assign(&g);
            }
            Ok((grads, d_x))
        }
        _ => Err(shape_err("trace direction does not match layer")),
    }
}

fn layer_backward(layer: &Layer, trace: &LayerTrace, d_out: &[Tensor]) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
    match (layer, trace) {
        (Layer::Dense(d), LayerTrace::Dense(steps)) => dense_backward(d, steps, d_out),
        (Layer::Rnn(r), LayerTrace::Rnn(t)) => recurrent_backward(
            r,
            &t.forward,
            t.backward.as_ref(),
            r.forward.units(),
            d_out,
            rnn_cell_backward,
        ),
        (Layer::Lstm(l), LayerTrace::Lstm(t)) => recurrent_backward(
            l,
            &t.forward,
            t.backward.as_ref(),
            l.forward.units(),
            d_out,
            lstm_cell_backward,
        ),
        _ => Err(shape_err("cache does not match model layers")),
    }
}

/// Backpropagates per-step output gradients through the whole model.
pub fn backward(model: &Model, cache: &ForwardCache, d_outputs: Vec<Tensor>) -> Result<GradientSet> {
    let layers = model.layers();
    if cache.layers.len() != layers.len() || d_outputs.len() != cache.seq_len() {
        return Err(shape_err("cache was not produced by this model"));
    }
    let mut per_layer: Vec<Vec<Tensor>> = vec![Vec::new(); layers.len()];
    let mut upstream = d_outputs;
    for idx in (0..layers.len()).rev() {
        if let Some(masks) = &cache.masks[idx] {
            upstream = upstream.iter().zip(masks).map(|(g, m)| g.hadamard(m)).collect();
        }
        let (grads, d_x) = layer_backward(&layers[idx], &cache.layers[idx], &upstream)?;
        per_layer[idx] = grads;
        let prev_algebra = if idx == 0 {
            cache.input_algebra
        } else {
            layers[idx - 1].algebra()
        };
        // Algebra conversion is a re-indexing, so gradients convert the same way.
        upstream = d_x
            .iter()
            .map(|g| g.convert(prev_algebra))
            .collect::<Result<_>>()?;
    }
    let names = model.params().into_iter().map(|(n, _)| n).collect();
    Ok(GradientSet {
        names,
        grads: per_layer.into_iter().flatten().collect(),
        inputs: Some(upstream),
    })
}

/// Loss and analytic gradients for a forward cache.
pub fn qbptt_with_loss(
    model: &Model,
    cache: &ForwardCache,
    targets: &Targets,
    loss_kind: LossKind,
) -> Result<(f64, GradientSet)> {
    let loss = sequence_loss(&cache.outputs, targets, loss_kind)?;
    Ok((loss.value, backward(model, cache, loss.seeds)?))
}

pub fn qbptt(model: &Model, cache: &ForwardCache, targets: &Targets, loss_kind: LossKind) -> Result<GradientSet> {
    Ok(qbptt_with_loss(model, cache, targets, loss_kind)?.1)
}

#![allow(dead_code)]

use qnn::qcore::{Activation, Algebra, Quaternion, Tensor};
use qnn::qgrad::GradientSet;
use qnn::qnet::{LayerKind, LayerSpec, Model, ModelSpec};
use qnn::qtrain::{Batch, LossKind, Targets};
use qnn::rng::{rng_from_seed, uniform, QRng};

pub fn random_tensor(rng: &mut QRng, algebra: Algebra, rows: usize, cols: usize, scale: f64) -> Tensor {
    let data = (0..rows * cols * algebra.dim()).map(|_| uniform(rng, -scale, scale)).collect();
    Tensor::from_data(algebra, rows, cols, data).unwrap()
}

pub fn random_quaternion(rng: &mut QRng, scale: f64) -> Quaternion {
    Quaternion::from_array(std::array::from_fn(|_| uniform(rng, -scale, scale))).unwrap()
}

pub fn real_kind(kind: LayerKind) -> LayerKind {
    match kind {
        LayerKind::QDense => LayerKind::Dense,
        LayerKind::QRnn => LayerKind::Rnn,
        LayerKind::QLstm => LayerKind::Lstm,
        k => k,
    }
}

fn is_bias(name: &str) -> bool {
    name.rsplit('.').next().is_some_and(|s| s.starts_with('b'))
}

/// `4m × 4k` real matrix whose `(i, j)` block is the left-multiplication
/// matrix of `w(i, j)`.
pub fn expand_weight(w: &Tensor) -> Tensor {
    let (m, k) = w.shape();
    let mut out = Tensor::zeros(Algebra::Real, 4 * m, 4 * k);
    for i in 0..m {
        for j in 0..k {
            let block = w.quat(i, j).to_real_matrix().0;
            for (a, row) in block.iter().enumerate() {
                for (b, &v) in row.iter().enumerate() {
                    out.set(0, 4 * i + a, 4 * j + b, v);
                }
            }
        }
    }
    out
}

/// Real network computing exactly what the all-quaternion `model` computes,
/// with every quaternion weight replaced by its block expansion.
pub fn expand_model(model: &Model) -> Model {
    let q = model.spec();
    let spec = ModelSpec {
        input_units: q.input_units * 4,
        layers: q
            .layers
            .iter()
            .map(|l| LayerSpec {
                kind: real_kind(l.kind),
                units: l.units * 4,
                ..l.clone()
            })
            .collect(),
        dropout: q.dropout,
    };
    let mut real = Model::new(spec, 0).unwrap();
    let names: Vec<String> = model.params().into_iter().map(|(n, _)| n).collect();
    let sources: Vec<Tensor> = model.params().into_iter().map(|(_, t)| t.clone()).collect();
    for ((dst, src), name) in real.params_mut().into_iter().zip(sources).zip(names) {
        let expanded = if is_bias(&name) { src.to_real() } else { expand_weight(&src) };
        assert_eq!(dst.shape(), expanded.shape(), "{name}");
        *dst = expanded;
    }
    real
}

/// Folds gradients of the expanded network back onto quaternion parameters:
/// component `p` of `∂L/∂w(i,j)` is `Σ_ab ∂L/∂E(4i+a, 4j+b) · M_p(a, b)` with
/// `M_p` the expansion of the `p`-th basis quaternion.
pub fn collapse_gradients(model: &Model, real: &GradientSet) -> Vec<Tensor> {
    let basis = [Quaternion::ONE, Quaternion::I, Quaternion::J, Quaternion::K].map(|e| e.to_real_matrix().0);
    model
        .params()
        .into_iter()
        .zip(&real.grads)
        .map(|((name, q), g)| {
            if is_bias(&name) {
                return Tensor::from_real(g, Algebra::Quaternion).unwrap();
            }
            let (m, k) = q.shape();
            let mut out = Tensor::zeros(Algebra::Quaternion, m, k);
            for i in 0..m {
                for j in 0..k {
                    for (p, mp) in basis.iter().enumerate() {
                        let mut s = 0.0;
                        for a in 0..4 {
                            for b in 0..4 {
                                s += g.get(0, 4 * i + a, 4 * j + b) * mp[a][b];
                            }
                        }
                        out.set(p, i, j, s);
                    }
                }
            }
            out
        })
        .collect()
}

/// Uniform inputs and every-step targets matched to `model`'s output; NLL
/// targets are positive and normalized per column.
pub fn random_batch(model: &Model, seq_len: usize, batch: usize, loss: LossKind, seed: u64) -> Batch {
    let mut rng = rng_from_seed(seed);
    let spec = model.spec();
    let inputs = (0..seq_len)
        .map(|_| random_tensor(&mut rng, spec.input_algebra(), spec.input_units, batch, 1.0))
        .collect();
    let rows = spec.output_reals();
    let targets = (0..seq_len)
        .map(|_| match loss {
            LossKind::Mse => random_tensor(&mut rng, Algebra::Real, rows, batch, 1.0),
            LossKind::Nll => {
                let mut t = Tensor::zeros(Algebra::Real, rows, batch);
                for c in 0..batch {
                    let col: Vec<f64> = (0..rows).map(|_| uniform(&mut rng, 0.1, 1.0)).collect();
                    let s: f64 = col.iter().sum();
                    for (r, v) in col.into_iter().enumerate() {
                        t.set(0, r, c, v / s);
                    }
                }
                t
            }
        })
        .collect();
    Batch {
        inputs,
        targets: Targets::every(targets),
    }
}

/// One quaternion layer of `kind` with a linear quaternion head.
pub fn single_layer(kind: LayerKind, n_in: usize, units: usize, activation: Activation, bidirectional: bool, seed: u64) -> Model {
    let mut layer = LayerSpec::new(kind, units, activation);
    layer.bidirectional = bidirectional;
    let spec = ModelSpec {
        input_units: n_in,
        layers: vec![layer, LayerSpec::new(kind.dense_of(), 2, Activation::Identity)],
        dropout: 0.0,
    };
    Model::new(spec, seed).unwrap()
}

/// Redraws every parameter uniformly in `(-scale, scale)`.
pub fn scramble(model: &mut Model, scale: f64, seed: u64) {
    let mut rng = rng_from_seed(seed);
    for p in model.params_mut() {
        p.data_mut().iter_mut().for_each(|v| *v = uniform(&mut rng, -scale, scale));
    }
}

pub fn max_abs_diff(a: &[Tensor], b: &[Tensor]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.max_abs_diff(y)).fold(0.0, f64::max)
}

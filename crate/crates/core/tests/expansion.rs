mod common;

use common::*;
use qnn::qcore::{Activation, Algebra};
use qnn::qgrad::qbptt;
use qnn::qnet::{ForwardMode, LayerKind, LayerSpec, Model, ModelSpec};
use qnn::qtrain::LossKind;
use qnn::rng::{derive_seed, index, rng_from_seed};

const KINDS: [LayerKind; 3] = [LayerKind::QDense, LayerKind::QRnn, LayerKind::QLstm];

/// Quaternion model and its block-expanded real twin on the same inputs.
fn forward_gap(model: &Model, seq_len: usize, batch: usize, seed: u64) -> f64 {
    let real = expand_model(model);
    let b = random_batch(model, seq_len, batch, LossKind::Mse, seed);
    let q_out = model.predict(&b.inputs).unwrap();
    let real_in: Vec<_> = b.inputs.iter().map(|x| x.to_real()).collect();
    let r_out = real.predict(&real_in).unwrap();
    let q_real: Vec<_> = q_out.iter().map(|t| t.to_real()).collect();
    max_abs_diff(&q_real, &r_out)
}

#[test]
fn every_layer_matches_its_expansion_on_random_shapes() {
    let mut rng = rng_from_seed(11);
    for trial in 0..30 {
        let kind = KINDS[trial % 3];
        let n_in = 1 + index(&mut rng, 8);
        let units = 1 + index(&mut rng, 8);
        let seq_len = 1 + index(&mut rng, 10);
        let act = [Activation::Tanh, Activation::Sigmoid, Activation::Relu, Activation::Identity][index(&mut rng, 4)];
        let mut m = single_layer(kind, n_in, units, act, trial % 4 == 3 && kind != LayerKind::QDense, trial as u64);
        // keeps the recurrence contractive so outputs stay O(1)
        let scale = 0.5 / ((n_in + units) as f64).sqrt();
        scramble(&mut m, scale, derive_seed(trial as u64, "w"));
        let gap = forward_gap(&m, seq_len, 3, trial as u64);
        assert!(gap <= 1e-12, "{kind} {n_in}->{units} T={seq_len}: {gap:e}");
    }
}

#[test]
fn stacked_model_matches_expansion() {
    let spec = ModelSpec {
        input_units: 3,
        layers: vec![
            LayerSpec::new(LayerKind::QLstm, 4, Activation::Tanh).bidirectional(),
            LayerSpec::new(LayerKind::QRnn, 5, Activation::Tanh),
            LayerSpec::new(LayerKind::QDense, 2, Activation::Identity),
        ],
        dropout: 0.0,
    };
    let m = Model::new(spec, 5).unwrap();
    assert!(forward_gap(&m, 7, 4, 1) <= 1e-12);
}

#[test]
fn quaternion_gradients_match_expanded_bptt() {
    for (n, kind) in KINDS.into_iter().enumerate() {
        for loss in [LossKind::Mse, LossKind::Nll] {
            let mut m = single_layer(kind, 3, 4, Activation::Tanh, kind != LayerKind::QDense, n as u64);
            scramble(&mut m, 0.7, 100 + n as u64);
            let real = expand_model(&m);
            let b = random_batch(&m, 6, 3, loss, 7);
            let q_cache = m.forward(&b.inputs, ForwardMode::Eval).unwrap();
            let q_grads = qbptt(&m, &q_cache, &b.targets, loss).unwrap();
            let real_in: Vec<_> = b.inputs.iter().map(|x| x.to_real()).collect();
            let r_cache = real.forward(&real_in, ForwardMode::Eval).unwrap();
            let r_grads = qbptt(&real, &r_cache, &b.targets, loss).unwrap();
            let folded = collapse_gradients(&m, &r_grads);
            for ((name, g), f) in q_grads.names.iter().zip(&q_grads.grads).zip(&folded) {
                assert_eq!(f.algebra(), Algebra::Quaternion);
                let gap = g.max_abs_diff(f);
                assert!(gap <= 1e-10, "{kind} {loss} {name}: {gap:e}");
            }
        }
    }
}

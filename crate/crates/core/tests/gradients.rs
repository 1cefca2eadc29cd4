mod common;

use common::*;
use qnn::qcore::{Activation, Algebra, Quaternion, Tensor};
use qnn::qgrad::{
    batch_loss, compare_gradients, fd_oracle, grad_check, grad_check_with_eps, qbptt, CheckPoint, GradientSet,
};
use qnn::qnet::{ForwardMode, LayerKind, LayerSpec, Model, ModelSpec, QrnnParams};
use qnn::qtrain::{Batch, LossKind, Targets};

fn scalar_model(w: f64) -> (Model, Batch) {
    let spec = ModelSpec {
        input_units: 1,
        layers: vec![LayerSpec::new(LayerKind::Dense, 1, Activation::Identity).without_bias()],
        dropout: 0.0,
    };
    let mut m = Model::new(spec, 0).unwrap();
    m.params_mut()[0].data_mut()[0] = w;
    let batch = Batch {
        inputs: vec![Tensor::real(1, 1, vec![1.0]).unwrap()],
        targets: Targets::every(vec![Tensor::real(1, 1, vec![0.0]).unwrap()]),
    };
    (m, batch)
}

#[test]
fn fd_of_square_at_three_is_six() {
    // L(w) = (w·1 − 0)² = w²
    let (m, b) = scalar_model(3.0);
    let g = fd_oracle(&m, &b, LossKind::Mse, 1e-6).unwrap();
    assert!((g.grads[0].data()[0] - 6.0).abs() <= 1e-8);
}

#[test]
fn central_difference_of_a_quadratic_ignores_eps() {
    let (m, b) = scalar_model(-1.25);
    for eps in [1e-4, 1e-6, 1e-8] {
        let g = fd_oracle(&m, &b, LossKind::Mse, eps).unwrap().grads[0].data()[0];
        assert!((g + 2.5).abs() <= 1e-7, "eps {eps}: {g}");
    }
}

#[test]
fn fd_rejects_out_of_range_eps() {
    let (m, b) = scalar_model(1.0);
    assert!(fd_oracle(&m, &b, LossKind::Mse, 1e-3).is_err());
    assert!(fd_oracle(&m, &b, LossKind::Mse, 1e-9).is_err());
}

#[test]
fn fd_is_bitwise_deterministic() {
    let (m, b) = CheckPoint::new(LayerKind::QLstm, 2, 3, LossKind::Nll, 3).build().unwrap();
    let a = fd_oracle(&m, &b, LossKind::Nll, 1e-6).unwrap();
    let c = fd_oracle(&m, &b, LossKind::Nll, 1e-6).unwrap();
    for (x, y) in a.grads.iter().zip(&c.grads) {
        assert!(x.data().iter().zip(y.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

#[test]
fn random_qrnn_four_units_six_steps() {
    let (m, b) = CheckPoint::new(LayerKind::QRnn, 4, 6, LossKind::Mse, 6).build().unwrap();
    let r = grad_check(&m, &b, LossKind::Mse, 1e-5).unwrap();
    assert!(r.passed, "{}", r.to_text());
}

// At 4 units some gate-weight gradients are ~1e-7, where the ~1e-11 rounding
// noise of central differences alone exceeds a 1e-5 relative bound. Every
// coordinate must either meet the bound or sit inside that absolute floor.
#[test]
fn qlstm_four_units_five_steps_nll() {
    let (m, b) = CheckPoint::new(LayerKind::QLstm, 4, 5, LossKind::Nll, 5).build().unwrap();
    let cache = m.forward(&b.inputs, ForwardMode::Eval).unwrap();
    let analytic = qbptt(&m, &cache, &b.targets, LossKind::Nll).unwrap();
    let numeric = fd_oracle(&m, &b, LossKind::Nll, 1e-6).unwrap();
    let mut over = 0;
    for ((name, a), n) in analytic.names.iter().zip(&analytic.grads).zip(&numeric.grads) {
        for (&x, &y) in a.data().iter().zip(n.data()) {
            let diff = (x - y).abs();
            if diff > 1e-5 * x.abs().max(y.abs()).max(1e-10) {
                over += 1;
                assert!(diff < 1e-10, "{name}: {x:e} vs {y:e}");
            }
        }
    }
    let r = compare_gradients(&analytic, &numeric, 1e-5).unwrap();
    assert!(over <= 2, "{over} noisy coordinates\n{}", r.to_text());
    assert!(r.max_rel_error < 1e-4, "{}", r.to_text());
}

#[test]
fn bidirectional_layers_check() {
    for kind in [LayerKind::QRnn, LayerKind::QLstm] {
        let p = CheckPoint::new(kind, 2, 4, LossKind::Mse, 44);
        let (_, b) = p.build().unwrap();
        let mut spec = p.model_spec();
        spec.layers[0] = spec.layers[0].clone().bidirectional();
        let mut m = Model::new(spec, 1).unwrap();
        scramble(&mut m, 1.0, 45);
        let r = grad_check(&m, &b, LossKind::Mse, 1e-5).unwrap();
        assert!(r.passed, "{kind}\n{}", r.to_text());
    }
}

#[test]
fn flipped_plane_is_caught_and_located() {
    let (m, b) = CheckPoint::new(LayerKind::QRnn, 2, 3, LossKind::Mse, 9).build().unwrap();
    let cache = m.forward(&b.inputs, ForwardMode::Eval).unwrap();
    let mut analytic = qbptt(&m, &cache, &b.targets, LossKind::Mse).unwrap();
    let numeric = fd_oracle(&m, &b, LossKind::Mse, 1e-6).unwrap();
    assert!(compare_gradients(&analytic, &numeric, 1e-5).unwrap().passed);

    let target = analytic.names.iter().position(|n| n == "l0.w_h").unwrap();
    let g = &mut analytic.grads[target];
    for v in g.plane_mut(2) {
        *v = -*v;
    }
    let r = compare_gradients(&analytic, &numeric, 1e-5).unwrap();
    assert!(!r.passed);
    assert_eq!(r.worst_param, "l0.w_h");
    let worst = r.params.iter().find(|p| p.name == "l0.w_h").unwrap();
    assert_eq!(worst.worst.plane, 2);
    assert!((worst.max_rel_error - 2.0).abs() < 1e-6);
}

#[test]
fn relu_kink_heuristic() {
    // every pre-activation sits at 1e-7, inside 10·eps of the kink
    let mut near = single_layer(LayerKind::QRnn, 1, 2, Activation::Relu, false, 0);
    for (i, p) in near.params_mut().into_iter().enumerate() {
        let v = if i == 2 { 1e-7 } else if i < 2 { 0.0 } else { 0.5 };
        p.data_mut().iter_mut().for_each(|x| *x = v);
    }
    let b = random_batch(&near, 3, 2, LossKind::Mse, 1);
    let r = grad_check(&near, &b, LossKind::Mse, 1e-5).unwrap();
    assert!(r.near_kink);
    assert!(r.to_text().contains("near kink"));

    let mut p = CheckPoint::new(LayerKind::QRnn, 2, 3, LossKind::Mse, 12);
    p.activation = Activation::Relu;
    let (m, b) = p.build().unwrap();
    let r = grad_check(&m, &b, LossKind::Mse, 1e-5).unwrap();
    let d = r.min_kink_distance.unwrap();
    assert_eq!(r.near_kink, d < 1e-5);
    if !r.near_kink {
        assert!(r.passed, "{}", r.to_text());
    }
}

#[test]
fn zero_network_zero_targets_zero_gradients() {
    for kind in [LayerKind::QDense, LayerKind::QRnn, LayerKind::QLstm] {
        let mut m = single_layer(kind, 2, 3, Activation::Tanh, false, 0);
        m.params_mut().into_iter().for_each(|p| p.fill_zero());
        let mut b = random_batch(&m, 4, 3, LossKind::Mse, 2);
        b.targets.steps.iter_mut().flatten().for_each(|t| t.fill_zero());
        let cache = m.forward(&b.inputs, ForwardMode::Eval).unwrap();
        let g = qbptt(&m, &cache, &b.targets, LossKind::Mse).unwrap();
        assert_eq!(g.global_norm(), 0.0, "{kind}");
        assert_eq!(batch_loss(&m, &b, LossKind::Mse).unwrap(), 0.0);
    }
}

fn hand_product(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    let [r1, x1, y1, z1] = a;
    let [r2, x2, y2, z2] = b;
    [
        r1 * r2 - x1 * x2 - y1 * y2 - z1 * z2,
        r1 * x2 + x1 * r2 + y1 * z2 - z1 * y2,
        r1 * y2 - x1 * z2 + y1 * r2 + z1 * x2,
        r1 * z2 + x1 * y2 - y1 * x2 + z1 * r2,
    ]
}

#[test]
fn output_weight_gradient_is_error_times_conjugate_state() {
    let mut p = QrnnParams::init(1, 1, 1, Activation::Identity, Activation::Identity, 3).unwrap();
    let set = |t: &mut Tensor, q: [f64; 4]| t.set_quat(0, 0, Quaternion::from_array(q).unwrap());
    set(&mut p.w_hx, [0.3, -0.2, 0.5, 0.1]);
    set(&mut p.w_hh, [0.7, 0.1, -0.4, 0.2]);
    set(&mut p.w_hy, [-0.6, 0.25, 0.15, -0.35]);
    set(&mut p.b_h, [0.05, -0.1, 0.2, 0.0]);
    let model = p.to_model().unwrap();
    let x = [0.9, -0.4, 0.3, 0.8];
    let y = [0.2, 0.1, -0.3, 0.4];
    let batch = Batch {
        inputs: vec![Tensor::from_quaternions(1, 1, &[Quaternion::from_array(x).unwrap()]).unwrap()],
        targets: Targets::every(vec![Tensor::real(4, 1, y.to_vec()).unwrap()]),
    };
    let cache = model.forward(&batch.inputs, ForwardMode::Eval).unwrap();
    let g = qbptt(&model, &cache, &batch.targets, LossKind::Mse).unwrap();

    // h = W_hx ⊗ x + b (h_0 = 0), p = W_hy ⊗ h; MSE over 4 reals gives ∂L/∂p = (p − y)/2
    let h: [f64; 4] = {
        let wx = hand_product([0.3, -0.2, 0.5, 0.1], x);
        std::array::from_fn(|i| wx[i] + [0.05, -0.1, 0.2, 0.0][i])
    };
    let pred = hand_product([-0.6, 0.25, 0.15, -0.35], h);
    let err: [f64; 4] = std::array::from_fn(|i| (pred[i] - y[i]) / 2.0);
    let expected = hand_product(err, [h[0], -h[1], -h[2], -h[3]]);
    let got = g.get("l1.w").unwrap().quat(0, 0).to_array();
    for i in 0..4 {
        assert!((got[i] - expected[i]).abs() < 1e-14, "{got:?} vs {expected:?}");
    }
}

#[test]
fn input_gradient_step_lowers_the_loss() {
    for kind in [LayerKind::QDense, LayerKind::QRnn, LayerKind::QLstm] {
        for loss in [LossKind::Mse, LossKind::Nll] {
            let (m, b) = CheckPoint::new(kind, 3, 4, loss, 21).build().unwrap();
            let cache = m.forward(&b.inputs, ForwardMode::Eval).unwrap();
            let g: GradientSet = qbptt(&m, &cache, &b.targets, loss).unwrap();
            let dx = g.inputs.expect("input gradients");
            let before = batch_loss(&m, &b, loss).unwrap();
            let eta = 1e-3;
            let stepped = Batch {
                inputs: b.inputs.iter().zip(&dx).map(|(x, d)| x.sub(&d.scale(eta))).collect(),
                targets: b.targets.clone(),
            };
            let after = batch_loss(&m, &stepped, loss).unwrap();
            assert!(after < before, "{kind} {loss}: {after} !< {before}");
        }
    }
}

#[test]
fn input_gradients_match_finite_differences() {
    let (m, b) = CheckPoint::new(LayerKind::QLstm, 2, 3, LossKind::Mse, 31).build().unwrap();
    let cache = m.forward(&b.inputs, ForwardMode::Eval).unwrap();
    let dx = qbptt(&m, &cache, &b.targets, LossKind::Mse).unwrap().inputs.unwrap();
    let eps = 1e-6;
    for t in 0..b.inputs.len() {
        for i in 0..b.inputs[t].real_len() {
            let probe = |d: f64| {
                let mut bb = b.clone();
                bb.inputs[t].data_mut()[i] += d;
                batch_loss(&m, &bb, LossKind::Mse).unwrap()
            };
            let fd = (probe(eps) - probe(-eps)) / (2.0 * eps);
            let a = dx[t].data()[i];
            // plain central differences carry ~1e-10 of rounding noise here
            assert!((fd - a).abs() <= 1e-8, "t{t} i{i}: {a} vs {fd}");
        }
    }
}

#[test]
fn check_point_validation() {
    let mut p = CheckPoint::new(LayerKind::QDense, 2, 0, LossKind::Mse, 0);
    assert!(p.build().is_err());
    p.seq_len = 2;
    p.param_scale = 0.0;
    assert!(p.build().is_err());
    assert!(grad_check_with_eps(&scalar_model(1.0).0, &scalar_model(1.0).1, LossKind::Mse, 0.0, 1e-6).is_err());
}

#[test]
fn real_layers_check_too() {
    for kind in [LayerKind::Dense, LayerKind::Rnn, LayerKind::Lstm] {
        let mut p = CheckPoint::new(kind, 4, 3, LossKind::Mse, 77);
        p.input_units = 2;
        let (m, b) = p.build().unwrap();
        assert_eq!(m.spec().input_algebra(), Algebra::Real);
        let r = grad_check(&m, &b, LossKind::Mse, 1e-5).unwrap();
        assert!(r.passed, "{kind}\n{}", r.to_text());
    }
}

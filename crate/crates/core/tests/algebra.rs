use proptest::prelude::*;
use qnn::qcore::{
    conjugate, hamilton_product, norm, normalize, qmatmul, split_activation, to_real_matrix, Activation, Algebra,
    Quaternion, Tensor,
};

fn quat(scale: f64) -> impl Strategy<Value = Quaternion> {
    prop::array::uniform4(-scale..scale).prop_map(|c| Quaternion::from_array(c).unwrap())
}

fn close(a: Quaternion, b: Quaternion, tol: f64) -> bool {
    a.to_array().iter().zip(b.to_array()).all(|(x, y)| (x - y).abs() <= tol)
}

fn tensor(algebra: Algebra, rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-2.0..2.0f64, rows * cols * algebra.dim())
        .prop_map(move |d| Tensor::from_data(algebra, rows, cols, d).unwrap())
}

#[test]
fn basis_products_are_exact() {
    let (i, j, k) = (Quaternion::I, Quaternion::J, Quaternion::K);
    assert_eq!(i * j, k);
    assert_eq!(j * i, -k);
    assert_eq!(j * k, i);
    assert_eq!(k * i, j);
    for e in [i, j, k] {
        assert_eq!(e * e, -Quaternion::ONE);
    }
    assert_eq!(i * j * k, -Quaternion::ONE);
}

#[test]
fn non_finite_components_are_rejected() {
    assert!(Quaternion::new(f64::NAN, 0.0, 0.0, 0.0).is_err());
    assert!(Quaternion::from_array([0.0, f64::INFINITY, 0.0, 0.0]).is_err());
    assert!(normalize(Quaternion::ZERO).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn product_is_associative(a in quat(3.0), b in quat(3.0), c in quat(3.0)) {
        prop_assert!(close((a * b) * c, a * (b * c), 1e-12));
    }

    #[test]
    fn product_distributes(a in quat(3.0), b in quat(3.0), c in quat(3.0)) {
        prop_assert!(close(a * (b + c), a * b + a * c, 1e-12));
    }

    #[test]
    fn norm_is_multiplicative(a in quat(3.0), b in quat(3.0)) {
        prop_assert!((norm(hamilton_product(a, b)) - norm(a) * norm(b)).abs() <= 1e-12);
    }

    #[test]
    fn conjugation_reverses_products(a in quat(3.0), b in quat(3.0)) {
        prop_assert!(close(conjugate(a * b), conjugate(b) * conjugate(a), 1e-12));
        prop_assert_eq!(conjugate(conjugate(a)), a);
    }

    #[test]
    fn product_with_conjugate_is_squared_norm(a in quat(3.0)) {
        let p = a * conjugate(a);
        prop_assert!(close(p, Quaternion::new(a.norm_squared(), 0.0, 0.0, 0.0).unwrap(), 1e-12));
    }

    #[test]
    fn matrix_representation_is_a_homomorphism(a in quat(3.0), b in quat(3.0)) {
        let lhs = to_real_matrix(a * b);
        let rhs = to_real_matrix(a).matmul(&to_real_matrix(b));
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
        let v = Quaternion::from_array(to_real_matrix(a).mul_vec(b.to_array())).unwrap();
        prop_assert!(close(v, a * b, 1e-12));
        prop_assert!(to_real_matrix(conjugate(a)).max_abs_diff(&to_real_matrix(a).transpose()) == 0.0);
    }

    #[test]
    fn normalize_gives_unit_norm(a in quat(3.0)) {
        prop_assume!(a.norm() > 1e-6);
        prop_assert!((normalize(a).unwrap().norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn qmatmul_is_entrywise_hamilton(w in tensor(Algebra::Quaternion, 3, 4), x in tensor(Algebra::Quaternion, 4, 5)) {
        let y = qmatmul(&w, &x).unwrap();
        for r in 0..3 {
            for c in 0..5 {
                let mut s = Quaternion::ZERO;
                for k in 0..4 {
                    s += w.quat(r, k) * x.quat(k, c);
                }
                prop_assert!(close(y.quat(r, c), s, 1e-12));
            }
        }
    }

    #[test]
    fn real_matmul_is_ordinary(w in tensor(Algebra::Real, 5, 6), x in tensor(Algebra::Real, 6, 7)) {
        let y = qmatmul(&w, &x).unwrap();
        for r in 0..5 {
            for c in 0..7 {
                let s: f64 = (0..6).map(|k| w.get(0, r, k) * x.get(0, k, c)).sum();
                prop_assert!((y.get(0, r, c) - s).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn conj_transpose_reverses_products(w in tensor(Algebra::Quaternion, 3, 4), x in tensor(Algebra::Quaternion, 4, 2)) {
        let lhs = qmatmul(&w, &x).unwrap().conj_transpose();
        let rhs = qmatmul(&x.conj_transpose(), &w.conj_transpose()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
    }

    #[test]
    fn split_activation_acts_per_component(x in tensor(Algebra::Quaternion, 2, 3)) {
        for f in [Activation::Tanh, Activation::Sigmoid, Activation::Relu, Activation::Identity] {
            let y = split_activation(&x, f);
            for (a, b) in y.data().iter().zip(x.data()) {
                prop_assert_eq!(*a, f.apply(*b));
            }
        }
    }

    #[test]
    fn real_flattening_round_trips(x in tensor(Algebra::Quaternion, 3, 2)) {
        let r = x.to_real();
        prop_assert_eq!(r.shape(), (12, 2));
        prop_assert_eq!(Tensor::from_real(&r, Algebra::Quaternion).unwrap(), x);
    }
}

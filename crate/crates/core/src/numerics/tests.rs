use proptest::prelude::*;

use super::*;
use crate::error::Error;

fn naive_matmul(a: &Tensor2, b: &Tensor2) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; b.cols()]; a.rows()];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            for k in 0..a.cols() {
                *cell += a.get(i, k) * b.get(k, j);
            }
        }
    }
    out
}

#[test]
fn matmul_identity_and_projector() {
    let m = Tensor2::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
    assert_eq!(Tensor2::matmul(&Tensor2::identity(2), &m).unwrap(), m);

    let p = Tensor2::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
    let v = Tensor2::column(&[5.0, 7.0]);
    assert_eq!(Tensor2::matmul(&p, &v).unwrap(), Tensor2::column(&[5.0, 0.0]));
}

#[test]
fn matmul_matches_triple_loop() {
    let mut rng = RngStream::new(11);
    let a = rng.uniform(-1.0, 1.0, 3, 4).unwrap();
    let b = rng.uniform(-1.0, 1.0, 4, 2).unwrap();
    let fast = Tensor2::matmul(&a, &b).unwrap();
    let slow = naive_matmul(&a, &b);
    for i in 0..3 {
        for j in 0..2 {
            assert!((fast.get(i, j) - slow[i][j]).abs() < 1e-12);
        }
    }
}

#[test]
fn transposed_products_agree_with_explicit_transpose() {
    let mut rng = RngStream::new(3);
    let a = rng.uniform(-1.0, 1.0, 4, 3).unwrap();
    let b = rng.uniform(-1.0, 1.0, 4, 5).unwrap();
    let c = rng.uniform(-1.0, 1.0, 2, 3).unwrap();
    let tn = Tensor2::matmul_tn(&a, &b).unwrap();
    let tn_ref = Tensor2::matmul(&a.transpose(), &b).unwrap();
    let nt = Tensor2::matmul_nt(&a, &c).unwrap();
    let nt_ref = Tensor2::matmul(&a, &c.transpose()).unwrap();
    for (x, y) in tn.data().iter().zip(tn_ref.data()) {
        assert!((x - y).abs() < 1e-14);
    }
    for (x, y) in nt.data().iter().zip(nt_ref.data()) {
        assert!((x - y).abs() < 1e-14);
    }
}

#[test]
fn matmul_rejects_mismatch_with_both_shapes() {
    let err = Tensor2::matmul(&Tensor2::zeros(2, 3), &Tensor2::zeros(2, 3)).unwrap_err();
    match err {
        Error::ShapeMismatch { left, right, .. } => {
            assert_eq!(left, (2, 3));
            assert_eq!(right, (2, 3));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn activation_fixed_points() {
    let zero = Tensor2::zeros(1, 4);
    assert_eq!(activation(&zero, Activation::Sigmoid).data(), &[0.5; 4]);
    assert_eq!(activation(&zero, Activation::Tanh).data(), &[0.0; 4]);
    assert_eq!(activation(&zero, Activation::SoftmaxRows).data(), &[0.25; 4]);
}

#[test]
fn softmax_survives_huge_logits() {
    let v = Tensor2::from_rows(&[&[1000.0, 1000.0, -1000.0]]);
    let s = softmax_rows(&v);
    assert!(s.is_finite());
    assert!((s.get(0, 0) - 0.5).abs() < 1e-15);
    let cols = softmax_cols(&v.transpose());
    assert_eq!(cols.transpose(), s);
}

#[test]
fn uniform_degenerate_interval_and_determinism() {
    let mut rng = RngStream::new(5);
    let t = rng.uniform(2.5, 2.5, 3, 3).unwrap();
    assert!(t.data().iter().all(|&v| v == 2.5));

    let a = RngStream::new(99).uniform(-1.0, 1.0, 4, 4).unwrap();
    let b = RngStream::new(99).uniform(-1.0, 1.0, 4, 4).unwrap();
    assert_eq!(a, b);

    assert!(RngStream::new(0).uniform(1.0, 0.0, 1, 1).is_err());
}

#[test]
fn uniform_mean_is_half() {
    let t = RngStream::new(2024).uniform(0.0, 1.0, 1, 100_000).unwrap();
    let mean = t.sum() / 100_000.0;
    assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
}

#[test]
fn derived_streams_differ_by_label_and_index() {
    let a = RngStream::derive(1, "shuffle", 0).next_u64();
    let b = RngStream::derive(1, "shuffle", 1).next_u64();
    let c = RngStream::derive(1, "dropout", 0).next_u64();
    assert_ne!(a, b);
    assert_ne!(a, c);
    assert_eq!(a, RngStream::derive(1, "shuffle", 0).next_u64());
}

#[test]
fn flop_counter_counts_matmul_convention() {
    let a = Tensor2::zeros(3, 4);
    let b = Tensor2::zeros(4, 2);
    let (_, tally) = flops::measure(|| Tensor2::matmul(&a, &b).unwrap());
    assert_eq!(tally.mults, 3 * 2 * 4);
    assert_eq!(tally.adds, 3 * 2 * 3);
    // Outside a scope nothing is recorded.
    let _ = Tensor2::matmul(&a, &b).unwrap();
    let (_, empty) = flops::measure(|| ());
    assert_eq!(empty.total(), 0);
}

fn tensor(rows: usize, cols: usize) -> impl Strategy<Value = Tensor2> {
    proptest::collection::vec(-2.0f64..2.0, rows * cols)
        .prop_map(move |d| Tensor2::from_vec(rows, cols, d).unwrap())
}

proptest! {
    #[test]
    fn matmul_is_associative(a in tensor(3, 4), b in tensor(4, 2), c in tensor(2, 5)) {
        let left = Tensor2::matmul(&Tensor2::matmul(&a, &b).unwrap(), &c).unwrap();
        let right = Tensor2::matmul(&a, &Tensor2::matmul(&b, &c).unwrap()).unwrap();
        let scale = left.max_abs().max(1.0);
        for (x, y) in left.data().iter().zip(right.data()) {
            prop_assert!((x - y).abs() / scale < 1e-9);
        }
    }

    #[test]
    fn sigmoid_strictly_inside_unit_interval(v in proptest::collection::vec(-1e4f64..1e4, 1..40)) {
        let t = Tensor2::from_vec(1, v.len(), v).unwrap();
        for &s in activation(&t, Activation::Sigmoid).data() {
            prop_assert!(s > 0.0 && s < 1.0);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one(t in tensor(4, 6).prop_map(|t| t.scale(50.0))) {
        let s = softmax_rows(&t);
        for r in 0..4 {
            let total: f64 = (0..6).map(|c| s.get(r, c)).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
    }
}

// Reference values to 300 bits, split as (hi, lo).
const DD_CASES: &[(&str, f64, f64, f64)] = &[
    ("exp", 0.3, 1.3498588075760032, -9.447314673432387e-17),
    ("exp", -1.7, 0.18268352405273466, -5.430659906894856e-18),
    ("exp", 2.5, 12.182493960703473, 2.0334002173348147e-16),
    ("exp", 0.001, 1.0010005001667084, -4.290842058948394e-17),
    ("exp", -20.25, 1.6052280551856116e-09, -3.657643988865463e-26),
    ("exp", 0.0, 1.0, 0.0),
    ("exp", -0.347, 0.7068053282577494, 3.6802037775903755e-17),
    ("exp", 0.35, 1.4190675485932571, 9.472477310898604e-17),
    ("exp", 12.0, 162754.79141900392, 5.30065881322063e-12),
    ("tanh", 0.3, 0.2913126124515909, -6.4602656586469586e-18),
    ("tanh", -1.7, -0.935409070603099, -6.160665782786146e-18),
    ("tanh", 2.5, 0.9866142981514303, -2.4529238788172874e-17),
    ("tanh", 0.001, 0.0009999996666668, 1.7800613799166557e-20),
    ("tanh", 1e-09, 1e-09, -3.3333333333333338e-28),
    ("tanh", -0.6, -0.5370495669980353, 2.923064398544366e-17),
    ("sig", 0.3, 0.574442516811659, -4.7456482573436975e-17),
    ("sig", -1.7, 0.1544652650835347, 1.2712828152030675e-17),
    ("sig", 2.5, 0.9241418199787564, 8.549720986121e-18),
    ("sig", -30.0, 9.357622968839299e-14, 8.837142511495094e-31),
    ("expm1", 1e-06, 1.0000005000001665e-06, 1.05053184358979e-22),
    ("expm1", -0.2, -0.18126924692201815, 8.381141526439973e-19),
    ("expm1", 0.3, 0.3498588075760031, 1.6549155728191776e-17),
    ("expm1", -3.0, -0.950212931632136, -8.422032873046665e-18),
];

#[test]
fn double_double_functions_match_reference() {
    for &(f, x, hi, lo) in DD_CASES {
        let x = DoubleDouble::from(x);
        let got = match f {
            "exp" => x.exp(),
            "tanh" => x.tanh(),
            "sig" => x.sigmoid(),
            _ => x.exp_m1(),
        };
        let want = DoubleDouble::new(hi, lo);
        let rel = (got - want).to_f64().abs() / hi.abs();
        assert!(rel < 1e-29, "{f}({}) rel err {rel:e}", x.hi());
    }
}

#[test]
fn double_double_arithmetic() {
    let third = DoubleDouble::ONE / DoubleDouble::from(3.0);
    assert_eq!(third.hi(), 1.0 / 3.0);
    assert!((third.lo() - 1.850371707708594e-17).abs() < 1e-32);
    let back = third * DoubleDouble::from(3.0) - DoubleDouble::ONE;
    assert!(back.to_f64().abs() < 1e-31);
    // 1 + 2^-80 survives, which a plain f64 sum would drop.
    let tiny = 2f64.powi(-80);
    let s = DoubleDouble::ONE + DoubleDouble::from(tiny) - DoubleDouble::ONE;
    assert_eq!(s.to_f64(), tiny);
    assert!(DoubleDouble::from(1.0) < DoubleDouble::new(1.0, 1e-20));
}

proptest! {
    #[test]
    fn double_double_rounds_to_libm(x in -30.0f64..30.0) {
        let d = DoubleDouble::from(x);
        prop_assert!((d.exp().to_f64() - x.exp()).abs() <= 2.0 * f64::EPSILON * x.exp());
        prop_assert!((d.tanh().to_f64() - x.tanh()).abs() <= 2.0 * f64::EPSILON);
        prop_assert!((d.sigmoid().to_f64() - sigmoid(x)).abs() <= 2.0 * f64::EPSILON);
    }
}

#[test]
fn sigmoid_saturation_stays_open() {
    for s in [-1e308, -800.0, -40.0, 40.0, 800.0, 1e308] {
        let y = sigmoid(s);
        assert!(y > 0.0 && y < 1.0, "sigmoid({s}) = {y}");
    }
    assert_eq!(sigmoid(0.0), 0.5);
}

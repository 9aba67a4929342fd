use proptest::prelude::*;

use super::*;

fn set(values: &[&[f64]]) -> GradientSet {
    GradientSet {
        names: (0..values.len()).map(|i| format!("g{i}")).collect(),
        tensors: values.iter().map(|v| Tensor2::column(v)).collect(),
    }
}

#[test]
fn clip_leaves_small_gradients_alone() {
    let g = set(&[&[0.5, -1.0, 1.0], &[0.0]]);
    assert_eq!(clip_gradients(&g, 1.0), g);
}

#[test]
fn clip_clamps_large_entries() {
    let g = set(&[&[3.7, -2.2, 0.3]]);
    assert_eq!(clip_gradients(&g, 1.0).tensors[0].data(), &[1.0, -1.0, 0.3]);
}

#[test]
fn global_norm_clip_rescales() {
    let g = set(&[&[3.0], &[4.0]]);
    let c = clip_global_norm(&g, 1.0);
    assert!((c.global_norm() - 1.0).abs() < 1e-15);
    assert!((c.tensors[0].get(0, 0) - 0.6).abs() < 1e-15);
    assert_eq!(clip_global_norm(&g, 10.0), g);
    assert_eq!(clip(&g, ClipMode::GlobalNorm, 1.0), c);
}

proptest! {
    #[test]
    fn clip_bounds_and_idempotence(v in prop::collection::vec(-50.0f64..50.0, 1..20), amp in 0.1f64..5.0) {
        let g = set(&[&v]);
        let once = clip_gradients(&g, amp);
        prop_assert!(once.max_abs() <= amp);
        prop_assert_eq!(clip_gradients(&once, amp), once);
    }
}

#[test]
fn adam_zero_gradient_is_a_no_op() {
    let mut p = Tensor2::column(&[1.0, -2.0]);
    let mut state = AdamState::new([&p]);
    let g = Tensor2::zeros(2, 1);
    adam_step(&mut [&mut p], &[g], &mut state, 0.1).unwrap();
    assert_eq!(p.data(), &[1.0, -2.0]);
    assert_eq!(state.step, 1);
}

#[test]
fn adam_first_step_matches_scalar_oracle() {
    let (lr, g, theta) = (0.01, 0.3, 0.5);
    let m = 0.1 * g;
    let v = 0.001 * g * g;
    let m_hat = m / (1.0 - 0.9f64);
    let v_hat = v / (1.0 - 0.999f64);
    let expect = theta - lr * m_hat / (v_hat.sqrt() + 1e-8);

    let mut p = Tensor2::filled(1, 1, theta);
    let mut state = AdamState::new([&p]);
    adam_step(&mut [&mut p], &[Tensor2::filled(1, 1, g)], &mut state, lr).unwrap();
    assert!((p.get(0, 0) - expect).abs() < 1e-15);
    // The bias-corrected first step has magnitude ≈ lr regardless of |g|.
    assert!(((theta - p.get(0, 0)) - lr).abs() < 1e-6);
}

#[test]
fn adam_constant_gradient_step_tends_to_lr() {
    let lr = 0.002;
    let mut p = Tensor2::column(&[0.0, 0.0, 0.0]);
    let g = Tensor2::column(&[0.5, -3.0, 1e-3]);
    let mut state = AdamState::new([&p]);
    let mut prev = p.clone();
    for _ in 0..200 {
        adam_step(&mut [&mut p], std::slice::from_ref(&g), &mut state, lr).unwrap();
        let step = p.sub(&prev).unwrap();
        for s in step.data() {
            assert!((s.abs() - lr).abs() < 0.01 * lr);
        }
        prev = p.clone();
    }
}

#[test]
fn adam_rejects_non_finite_without_mutation() {
    let mut p = Tensor2::column(&[1.0, 2.0]);
    let mut state = AdamState::new([&p]);
    let g = Tensor2::column(&[0.1, f64::NAN]);
    assert!(adam_step(&mut [&mut p], &[g], &mut state, 0.1).is_err());
    assert_eq!(p.data(), &[1.0, 2.0]);
    assert_eq!(state.step, 0);
    assert!(adam_step(&mut [&mut p], &[Tensor2::zeros(1, 1)], &mut state, 0.1).is_err());
}

#[test]
fn adam_is_deterministic() {
    let run = || {
        let mut p = Tensor2::column(&[0.1, 0.2]);
        let mut state = AdamState::new([&p]);
        for k in 0..50 {
            let g = Tensor2::column(&[(k as f64).sin(), (k as f64 * 0.3).cos()]);
            adam_step(&mut [&mut p], &[g], &mut state, 0.01).unwrap();
        }
        p
    };
    assert_eq!(run().data(), run().data());
}

#[test]
fn schedule_keeps_lr_while_improving() {
    let mut s = LrSchedule::new(0.005);
    for acc in [0.1, 0.2, 0.3, 0.9] {
        assert!(!s.update(acc));
    }
    assert_eq!(s.lr, 0.005);
}

#[test]
fn schedule_decays_on_plateau() {
    let mut s = LrSchedule::new(0.005);
    assert!(!s.update(0.5));
    assert!(s.update(0.5));
    assert!((s.lr - 0.0005).abs() < 1e-18);
    // A worse epoch right after a decay decays again with patience 1.
    assert!(s.update(0.4));
    assert!(!s.update(0.6));
    assert_eq!(s.stale_epochs, 0);
}

#[test]
fn schedule_respects_patience() {
    let mut s = LrSchedule::new(1.0);
    s.patience = 3;
    s.update(0.5);
    assert!(!s.update(0.5));
    assert!(!s.update(0.4));
    assert!(s.update(0.5));
    assert_eq!(s.lr, 0.1);
}

#[test]
fn schedule_stops_at_floor() {
    let mut s = LrSchedule::new(1e-5);
    s.update(0.5);
    assert!(s.update(0.5));
    assert!((s.lr - 1e-6).abs() < 1e-20);
    assert!(s.at_floor());
    for _ in 0..10 {
        assert!(!s.update(0.5));
    }
    assert!((s.lr - 1e-6).abs() < 1e-20);
    assert_eq!(s.stale_epochs, 11);
}

proptest! {
    #[test]
    fn schedule_is_non_increasing_by_tenths(accs in prop::collection::vec(0.0f64..1.0, 1..60)) {
        let mut s = LrSchedule::new(0.005);
        let mut prev = s.lr;
        for a in accs {
            let decayed = s.update(a);
            prop_assert!(s.lr > 0.0);
            if decayed {
                prop_assert!((s.lr * 10.0 - prev).abs() < 1e-15);
            } else {
                prop_assert_eq!(s.lr, prev);
            }
            prop_assert!(s.lr >= s.floor * (1.0 - 1e-9));
            prev = s.lr;
        }
    }
}

#[test]
fn schedule_validation() {
    assert!(LrSchedule::new(0.0).validate().is_err());
    assert!(LrSchedule::new(0.01).validate().is_ok());
    let mut s = LrSchedule::new(0.01);
    s.patience = 0;
    assert!(s.validate().is_err());
}

#[test]
fn clip_mode_parses() {
    assert_eq!("global_norm".parse::<ClipMode>().unwrap(), ClipMode::GlobalNorm);
    assert_eq!(ClipMode::Elementwise.to_string(), "elementwise");
    assert!("l2".parse::<ClipMode>().is_err());
}

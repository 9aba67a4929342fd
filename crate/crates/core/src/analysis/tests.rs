use proptest::prelude::*;

use super::*;
use crate::cells::CellKind;
use crate::data::SequenceBatch;
use crate::model::{LayerSpec, Network, NetworkConfig, Readout};
use crate::numerics::{RngStream, Tensor2};
use crate::GateActivation;

fn single(kind: CellKind, d: usize, n: usize, gated: bool) -> NetworkConfig {
    NetworkConfig {
        input_dim: d,
        num_classes: 2,
        layers: vec![LayerSpec::new(kind, n, gated)],
        dropout: 0.0,
        readout: Readout::FinalStep,
    }
}

#[test]
fn gru_parameter_examples() {
    assert_eq!(block_params(CellKind::Gru, 75, 100), 52_800);
    assert_eq!(block_params(CellKind::Gru, 75, 100) + gate_params(75, 100), 66_000);
    let r = count_params(&single(CellKind::Gru, 75, 100, true)).unwrap();
    assert_eq!(r.layers[0].params(), 66_000);
    let three = NetworkConfig::stacked(75, 60, 3, LayerSpec::new(CellKind::Gru, 100, false));
    let r = count_params(&three).unwrap();
    assert_eq!(r.total_params, 179_460);
    assert_eq!(r.fc_params, 60 * 101);
    assert!(r.consistent());
}

#[test]
fn gru_flop_examples() {
    // N(6D+6N+5) with D=2, N=3, and the gate's D(2D+2N+1).
    assert_eq!(block_flops(CellKind::Gru, 2, 3).total(), 105);
    let g = gate_flops(2, 3);
    assert_eq!((g.mults, g.adds), (2 * 6, 2 * 5));
    assert_eq!(g.total(), 22);
    let r = count_flops(&single(CellKind::Gru, 2, 3, true)).unwrap();
    assert_eq!(r.flops_per_step, 127);
    assert_eq!(r.measured_flops_per_step, 127);
}

#[test]
fn srnn_and_lstm_flop_closed_forms() {
    // Independent tallies written out term by term.
    let (d, n) = (5u64, 7u64);
    let srnn = 2 * n * (d + n);
    let lstm = 8 * n * (d + n) + 4 * n;
    assert_eq!(block_flops(CellKind::Srnn, 5, 7).total(), srnn);
    assert_eq!(block_flops(CellKind::Lstm, 5, 7).total(), lstm);
    assert_eq!(block_flops(CellKind::Gru, 5, 7).total(), n * (6 * d + 6 * n + 5));
}

fn arb_config() -> impl Strategy<Value = NetworkConfig> {
    let layer = (0usize..3, 1usize..12, any::<bool>()).prop_map(|(k, n, g)| {
        let mut spec = LayerSpec::new(CellKind::ALL[k], n, g);
        if g && n % 2 == 0 {
            spec.gate_activation = GateActivation::Softmax;
        }
        spec
    });
    (1usize..12, 2usize..8, prop::collection::vec(layer, 1..4)).prop_map(|(d, k, layers)| NetworkConfig {
        input_dim: d,
        num_classes: k,
        layers,
        dropout: 0.5,
        readout: Readout::FinalStep,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn formulas_match_enumeration_and_measurement(cfg in arb_config()) {
        let r = CostReport::new(&cfg).unwrap();
        prop_assert_eq!(r.total_params, Network::zeros(cfg.clone()).unwrap().num_params());
        for l in &r.layers {
            prop_assert_eq!(l.params(), l.enumerated_params);
            prop_assert_eq!(l.block_flops.mults + l.gate_flops.mults, l.measured_flops.mults);
            prop_assert_eq!(l.block_flops.adds + l.gate_flops.adds, l.measured_flops.adds);
        }
        prop_assert!(r.consistent());
    }
}

#[test]
fn report_renders_text_and_json() {
    let r = CostReport::new(&single(CellKind::Gru, 75, 100, true)).unwrap();
    let text = r.to_string();
    assert!(text.contains("66000"));
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(json["layers"][0]["kind"], "gru");
    assert_eq!(json["total_params"], 66_000 + 2 * 101);
}

fn batch(d: usize, lengths: &[usize], seed: u64) -> SequenceBatch {
    let mut rng = RngStream::new(seed);
    let inputs = lengths.iter().map(|&t| rng.uniform(-1.0, 1.0, d, t).unwrap()).collect();
    SequenceBatch::new(d, 2, inputs, vec![0; lengths.len()]).unwrap()
}

#[test]
fn zero_gate_responds_one_half() {
    let net = Network::zeros(single(CellKind::Gru, 4, 3, true)).unwrap();
    let trace = extract_attention(&net, &batch(4, &[3, 5], 1)).unwrap();
    let lt = trace.first();
    assert_eq!(lt.shape(), (5, 4, 2));
    for r in &lt.responses {
        assert!(r.data().iter().all(|&v| v == 0.5));
    }
    assert_eq!(lt.response(4, 0, 0), None);
    assert_eq!(lt.response(4, 0, 1), Some(0.5));
}

#[test]
fn extraction_is_deterministic_and_non_perturbing() {
    let mut cfg = single(CellKind::Lstm, 4, 3, true);
    cfg.layers.push(LayerSpec::new(CellKind::Lstm, 2, true));
    let net = Network::build(cfg, 5).unwrap();
    let b = batch(4, &[2, 6, 4], 3);
    let before = net.predict(&b).unwrap();
    let t1 = extract_attention(&net, &b).unwrap();
    let t2 = extract_attention(&net, &b).unwrap();
    assert_eq!(t1, t2);
    assert_eq!(net.predict(&b).unwrap(), before);
    assert_eq!(t1.layers.len(), 2);
    assert_eq!(t1.layer(1).unwrap().dim(), 3);
    // Recorded inputs of layer 0 are the raw sequences.
    assert_eq!(&t1.first().inputs, b.inputs());
    for r in &t1.first().responses {
        assert!(r.data().iter().all(|&v| v > 0.0 && v < 1.0));
    }
}

#[test]
fn extraction_requires_a_gated_layer() {
    let net = Network::build(single(CellKind::Srnn, 3, 2, false), 0).unwrap();
    assert!(matches!(
        extract_attention(&net, &batch(3, &[2], 0)),
        Err(crate::Error::NoGatedLayer)
    ));
}

#[test]
fn softmax_trace_columns_sum_to_one() {
    let mut cfg = single(CellKind::Gru, 5, 4, true);
    cfg.layers[0].gate_activation = GateActivation::Softmax;
    let net = Network::build(cfg, 2).unwrap();
    let trace = extract_attention(&net, &batch(5, &[7, 3], 4)).unwrap();
    for r in &trace.first().responses {
        for t in 0..r.cols() {
            assert!((r.col(t).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

fn manual_trace(responses: Vec<Tensor2>, inputs: Vec<Tensor2>) -> AttentionTrace {
    AttentionTrace {
        lengths: responses.iter().map(Tensor2::cols).collect(),
        layers: vec![LayerTrace {
            layer: 0,
            responses,
            inputs,
        }],
    }
}

#[test]
fn constant_attention_normalizes_to_one() {
    let mut rng = RngStream::new(8);
    let x = rng.uniform(-3.0, 3.0, 6, 10).unwrap();
    let a = Tensor2::from_vec(6, 10, (0..60).map(|k| [0.2, 0.9, 0.5][k / 20]).collect()).unwrap();
    let trace = manual_trace(vec![a], vec![x]);
    for energy in [EnergyMode::MeanAbs, EnergyMode::Rms] {
        let rel = relative_attention(
            &trace,
            0,
            RelativeOptions {
                energy,
                ..Default::default()
            },
        )
        .unwrap();
        for i in 0..6 {
            let c = [0.2, 0.9, 0.5][i / 2];
            assert!((rel.static_factor[i].unwrap() - c).abs() < 1e-14);
            assert!((rel.mean_relative[i].unwrap() - 1.0).abs() < 1e-14);
        }
        let joints = rel.joints.as_ref().unwrap();
        assert_eq!(joints.len(), 2);
        assert!((joints[0].score.unwrap() - 3.0).abs() < 1e-13);
    }
}

#[test]
fn energy_ratio_oracle() {
    // One element, two frames: x = (1, -3), a = (0.5, 0.25).
    // Mean-abs: after = (0.5 + 0.75)/2, before = 2, factor = 0.3125,
    // mean response 0.375, relative 1.2.
    let trace = manual_trace(
        vec![Tensor2::from_rows(&[&[0.5, 0.25]])],
        vec![Tensor2::from_rows(&[&[1.0, -3.0]])],
    );
    let rel = relative_attention(&trace, 0, RelativeOptions::default()).unwrap();
    assert!((rel.static_factor[0].unwrap() - 0.3125).abs() < 1e-15);
    assert!((rel.mean_relative[0].unwrap() - 1.2).abs() < 1e-14);
    // RMS: sqrt((0.25 + 0.5625)/2) / sqrt(5) = sqrt(0.8125/10)
    let rms = relative_attention(
        &trace,
        0,
        RelativeOptions {
            energy: EnergyMode::Rms,
            ..Default::default()
        },
    )
    .unwrap();
    assert!((rms.static_factor[0].unwrap() - (0.08125f64).sqrt()).abs() < 1e-15);
    let plain = relative_attention(
        &trace,
        0,
        RelativeOptions {
            normalizer: Normalizer::MeanResponse,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(plain.mean_relative[0], Some(1.0));
}

#[test]
fn relative_attention_is_scale_invariant() {
    let mut rng = RngStream::new(3);
    let a = rng.uniform(0.05, 0.95, 4, 9).unwrap();
    let x = rng.uniform(-2.0, 2.0, 4, 9).unwrap();
    let base = relative_attention(&manual_trace(vec![a.clone()], vec![x.clone()]), 0, RelativeOptions::default()).unwrap();
    let doubled = relative_attention(&manual_trace(vec![a], vec![x.scale(2.0)]), 0, RelativeOptions::default()).unwrap();
    for i in 0..4 {
        let (p, q) = (base.mean_relative[i].unwrap(), doubled.mean_relative[i].unwrap());
        assert!((p - q).abs() < 1e-14 * p.abs());
    }
}

#[test]
fn zero_energy_elements_are_excluded() {
    let a = Tensor2::filled(2, 3, 0.4);
    let x = Tensor2::from_rows(&[&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0]]);
    let rel = relative_attention(&manual_trace(vec![a], vec![x]), 0, RelativeOptions::default()).unwrap();
    assert_eq!(rel.excluded, vec![0]);
    assert_eq!(rel.mean_relative[0], None);
    assert_eq!(rel.group_mean(&[0, 1]), rel.mean_relative[1]);
    assert!(relative_attention(&manual_trace(vec![], vec![]), 0, RelativeOptions::default()).is_err());
    let trace = manual_trace(vec![Tensor2::filled(2, 1, 0.5)], vec![Tensor2::filled(2, 1, 1.0)]);
    assert!(relative_attention(&trace, 3, RelativeOptions::default()).is_err());
}

#[test]
fn csv_has_one_row_per_step_and_element() {
    let net = Network::build(single(CellKind::Gru, 3, 2, true), 1).unwrap();
    let b = batch(3, &[4, 2], 9);
    let trace = extract_attention(&net, &b).unwrap();
    let rel = relative_attention(&trace, 0, RelativeOptions::default()).unwrap();
    let csv = attention_csv(&trace, &rel).unwrap();
    assert_eq!(csv.lines().count(), 1 + (4 + 2) * 3);
    assert!(csv.starts_with("sequence,step,element,input,response,relative\n"));
    let json: serde_json::Value = serde_json::from_str(&rel.to_json()).unwrap();
    assert_eq!(json["joints"].as_array().unwrap().len(), 1);
}

//! Shared fixtures for the benchmarks.

use eleatt::data::gen_distractor;
use eleatt::{CellKind, DistractorSpec, LayerSpec, Network, NetworkConfig, SequenceBatch};

/// A distractor-task training batch of `n` sequences.
pub fn task_batch(n: usize) -> SequenceBatch {
    let spec = DistractorSpec {
        train: n,
        val: 0,
        test: 0,
        seed: 11,
        ..DistractorSpec::default()
    };
    gen_distractor(&spec).expect("default spec is valid").train
}

/// Two layers of `hidden` units on the default task.
pub fn task_network(kind: CellKind, hidden: usize, gated: bool) -> Network {
    let d = DistractorSpec::default();
    let cfg = NetworkConfig::stacked(d.dims, d.classes, 2, LayerSpec::new(kind, hidden, gated));
    Network::build(cfg, 3).expect("valid network")
}

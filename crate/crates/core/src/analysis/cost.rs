//! Closed-form parameter and per-timestep arithmetic counts.
//!
//! One multiplication or one addition counts as one FLOP; activations are
//! free. Counts are per sample (batch size 1).

use std::fmt;

use serde::Serialize;

use crate::cells::{block_forward, CellKind, StepState};
use crate::error::Result;
use crate::model::{Network, NetworkConfig};
use crate::numerics::{flops, FlopTally, Tensor2};

/// Weights and biases of one block without a gate.
pub fn block_params(kind: CellKind, d: usize, n: usize) -> usize {
    kind.num_slots() * n * (d + n + 1)
}

/// Surcharge of the attention gate: `W_xa`, `W_ha` and `b_a`.
pub fn gate_params(d: usize, n: usize) -> usize {
    d * (d + n + 1)
}

pub fn fc_params(k: usize, n: usize) -> usize {
    k * (n + 1)
}

/// Multiplications and additions of one block step.
pub fn block_flops(kind: CellKind, d: usize, n: usize) -> FlopTally {
    let (d, n) = (d as u64, n as u64);
    // Each slot: W_x·x and W_h·h (N(D+N) mults, N(D+N-2) adds), then the sum
    // of the two products and the bias (2N adds).
    let slots = kind.num_slots() as u64;
    let mut t = FlopTally {
        mults: slots * n * (d + n),
        adds: slots * n * (d + n),
    };
    match kind {
        CellKind::Srnn => {}
        // f⊙c + i⊙g, o⊙tanh(c)
        CellKind::Lstm => {
            t.mults += 3 * n;
            t.adds += n;
        }
        // r⊙h, z⊙h, (1-z)⊙h', the `1 - z` and the final sum
        CellKind::Gru => {
            t.mults += 3 * n;
            t.adds += 2 * n;
        }
    }
    t
}

/// Gate response plus the modulation `a ⊙ x`.
pub fn gate_flops(d: usize, n: usize) -> FlopTally {
    let (d, n) = (d as u64, n as u64);
    FlopTally {
        mults: d * (d + n + 1),
        adds: d * (d + n),
    }
}

/// Runs one block step at batch size 1 under the operation counter.
pub fn measured_block_flops(net: &Network, layer: usize) -> Result<FlopTally> {
    let p = &net.layers[layer];
    let x = Tensor2::zeros(p.input_dim, 1);
    let s = StepState::zeros(p.kind, p.hidden_dim, 1);
    let (out, tally) = flops::measure(|| block_forward(&x, &s, p));
    out?;
    Ok(tally)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerCost {
    pub index: usize,
    pub kind: CellKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub gated: bool,
    pub block_params: usize,
    pub gate_params: usize,
    /// Parameter count read off the built tensors.
    pub enumerated_params: usize,
    pub block_flops: FlopTally,
    pub gate_flops: FlopTally,
    /// Operation count observed on the actual step code.
    pub measured_flops: FlopTally,
}

impl LayerCost {
    pub fn params(&self) -> usize {
        self.block_params + self.gate_params
    }

    pub fn flops(&self) -> u64 {
        self.block_flops.total() + self.gate_flops.total()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CostReport {
    pub layers: Vec<LayerCost>,
    pub num_classes: usize,
    pub fc_params: usize,
    pub total_params: usize,
    pub enumerated_total: usize,
    /// Recurrent FLOPs per timestep, all layers.
    pub flops_per_step: u64,
    pub measured_flops_per_step: u64,
}

impl CostReport {
    pub fn new(config: &NetworkConfig) -> Result<Self> {
        let net = Network::zeros(config.clone())?;
        let mut layers = Vec::with_capacity(config.layers.len());
        for (l, spec) in config.layers.iter().enumerate() {
            let d = config.layer_input_dim(l);
            let n = spec.hidden_dim;
            let gated = spec.gated;
            layers.push(LayerCost {
                index: l,
                kind: spec.kind,
                input_dim: d,
                hidden_dim: n,
                gated,
                block_params: block_params(spec.kind, d, n),
                gate_params: if gated { gate_params(d, n) } else { 0 },
                enumerated_params: net.layers[l].num_params(),
                block_flops: block_flops(spec.kind, d, n),
                gate_flops: if gated { gate_flops(d, n) } else { FlopTally::default() },
                measured_flops: measured_block_flops(&net, l)?,
            });
        }
        let fc = fc_params(config.num_classes, config.top_hidden_dim());
        Ok(Self {
            total_params: layers.iter().map(LayerCost::params).sum::<usize>() + fc,
            enumerated_total: net.num_params(),
            flops_per_step: layers.iter().map(LayerCost::flops).sum(),
            measured_flops_per_step: layers.iter().map(|l| l.measured_flops.total()).sum(),
            num_classes: config.num_classes,
            fc_params: fc,
            layers,
        })
    }

    /// Formula and enumeration agree everywhere.
    pub fn consistent(&self) -> bool {
        self.total_params == self.enumerated_total
            && self.flops_per_step == self.measured_flops_per_step
            && self.layers.iter().all(|l| {
                l.params() == l.enumerated_params
                    && l.block_flops.mults + l.gate_flops.mults == l.measured_flops.mults
                    && l.block_flops.adds + l.gate_flops.adds == l.measured_flops.adds
            })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cost report serializes")
    }
}

pub fn count_params(config: &NetworkConfig) -> Result<CostReport> {
    CostReport::new(config)
}

pub fn count_flops(config: &NetworkConfig) -> Result<CostReport> {
    CostReport::new(config)
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>5} {:>5} {:>5} {:>5} {:>5} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
            "layer", "kind", "D", "N", "gate", "block", "gate", "params", "counted", "flops", "gate fl", "measured"
        )?;
        for l in &self.layers {
            writeln!(
                f,
                "{:>5} {:>5} {:>5} {:>5} {:>5} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
                l.index,
                l.kind.as_str(),
                l.input_dim,
                l.hidden_dim,
                if l.gated { "yes" } else { "no" },
                l.block_params,
                l.gate_params,
                l.params(),
                l.enumerated_params,
                l.block_flops.total(),
                l.gate_flops.total(),
                l.measured_flops.total()
            )?;
        }
        writeln!(f, "fc    K={} params {}", self.num_classes, self.fc_params)?;
        writeln!(
            f,
            "total params {} (counted {}), flops/step {} (measured {})",
            self.total_params, self.enumerated_total, self.flops_per_step, self.measured_flops_per_step
        )
    }
}

//! Single-timestep recurrent blocks (sRNN, LSTM, GRU) and the element-wise
//! attention gate that can be attached to any of them.
//!
//! A block of `N` neurons reads a `D`-dimensional input. When a gate is
//! attached, the gate produces one response per *input element* (dimension
//! `D`, shared by all `N` neurons) and the block consumes `a ⊙ x` in place
//! of `x` on every input pathway. Recurrent pathways are untouched.
//!
//! Batches are carried column-wise: `x` is `D x B`, `h` is `N x B`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{RngStream, Tensor2};

mod step;

pub use step::{
    block_forward, block_step, gate_forward, gru_step, lstm_step, modulate, srnn_step,
    BlockCache, StepCache,
};


/// Gate slot indices inside [`CellParams`] for each kind.
pub mod slots {
    pub const SRNN_H: usize = 0;

    pub const LSTM_I: usize = 0;
    pub const LSTM_F: usize = 1;
    pub const LSTM_C: usize = 2;
    pub const LSTM_O: usize = 3;

    pub const GRU_R: usize = 0;
    pub const GRU_Z: usize = 1;
    pub const GRU_H: usize = 2;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Srnn,
    Lstm,
    Gru,
}

impl CellKind {
    pub const ALL: [CellKind; 3] = [CellKind::Srnn, CellKind::Lstm, CellKind::Gru];

    /// Number of (W_x, W_h, b) triples the block owns.
    pub fn num_slots(self) -> usize {
        match self {
            CellKind::Srnn => 1,
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }

    /// Suffixes used in parameter names, in slot order.
    pub fn slot_names(self) -> &'static [&'static str] {
        match self {
            CellKind::Srnn => &["h"],
            CellKind::Lstm => &["i", "f", "c", "o"],
            CellKind::Gru => &["r", "z", "h"],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::Srnn => "srnn",
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "srnn" | "rnn" => Ok(CellKind::Srnn),
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            other => Err(Error::InvalidConfig(format!("unknown cell kind `{other}`"))),
        }
    }
}

/// Activation applied to the gate pre-activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum GateActivation {
    /// Independent per-element responses in (0, 1).
    #[default]
    Sigmoid,
    /// Responses normalized to sum to one over the input elements.
    Softmax,
}

impl GateActivation {
    pub fn as_str(self) -> &'static str {
        match self {
            GateActivation::Sigmoid => "sigmoid",
            GateActivation::Softmax => "softmax",
        }
    }
}

impl fmt::Display for GateActivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GateActivation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(GateActivation::Sigmoid),
            "softmax" => Ok(GateActivation::Softmax),
            other => Err(Error::InvalidConfig(format!(
                "unknown gate activation `{other}`"
            ))),
        }
    }
}

/// Element-wise attention gate: `a = φ(W_xa·x + W_ha·h + b_a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    /// `D x D`
    pub w_xa: Tensor2,
    /// `D x N`
    pub w_ha: Tensor2,
    /// `D x 1`
    pub b_a: Tensor2,
    pub activation: GateActivation,
}

impl GateParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize, activation: GateActivation) -> Self {
        Self {
            w_xa: Tensor2::zeros(input_dim, input_dim),
            w_ha: Tensor2::zeros(input_dim, hidden_dim),
            b_a: Tensor2::zeros(input_dim, 1),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_xa.rows()
    }
}

/// Weights of one recurrent block.
///
/// Slot `k` holds the input matrix `w_x[k]` (`N x D`), the recurrent matrix
/// `w_h[k]` (`N x N`) and the bias `b[k]` (`N x 1`); see [`slots`] for the
/// per-kind layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CellParams {
    pub kind: CellKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_x: Vec<Tensor2>,
    pub w_h: Vec<Tensor2>,
    pub b: Vec<Tensor2>,
    pub gate: Option<GateParams>,
}

impl CellParams {
    pub fn zeros(
        kind: CellKind,
        input_dim: usize,
        hidden_dim: usize,
        gate: Option<GateActivation>,
    ) -> Self {
        let k = kind.num_slots();
        Self {
            kind,
            input_dim,
            hidden_dim,
            w_x: vec![Tensor2::zeros(hidden_dim, input_dim); k],
            w_h: vec![Tensor2::zeros(hidden_dim, hidden_dim); k],
            b: vec![Tensor2::zeros(hidden_dim, 1); k],
            gate: gate.map(|act| GateParams::zeros(input_dim, hidden_dim, act)),
        }
    }

    /// Matrices uniform on `±1/sqrt(fan_in)`, biases zero.
    pub fn init(
        kind: CellKind,
        input_dim: usize,
        hidden_dim: usize,
        gate: Option<GateActivation>,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::InvalidConfig(
                "cell dimensions must be positive".into(),
            ));
        }
        let mut p = Self::zeros(kind, input_dim, hidden_dim, gate);
        let bx = 1.0 / (input_dim as f64).sqrt();
        let bh = 1.0 / (hidden_dim as f64).sqrt();
        for w in &mut p.w_x {
            *w = rng.uniform(-bx, bx, hidden_dim, input_dim)?;
        }
        for w in &mut p.w_h {
            *w = rng.uniform(-bh, bh, hidden_dim, hidden_dim)?;
        }
        if let Some(g) = &mut p.gate {
            g.w_xa = rng.uniform(-bx, bx, input_dim, input_dim)?;
            g.w_ha = rng.uniform(-bh, bh, input_dim, hidden_dim)?;
        }
        Ok(p)
    }

    pub fn is_gated(&self) -> bool {
        self.gate.is_some()
    }

    /// Same shapes, all zeros. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(
            self.kind,
            self.input_dim,
            self.hidden_dim,
            self.gate.as_ref().map(|g| g.activation),
        )
    }

    /// Parameter tensors in canonical order with their names.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor2)> {
        let names = self.kind.slot_names();
        let mut out = Vec::new();
        for (n, w) in names.iter().zip(&self.w_x) {
            out.push((format!("w_x{n}"), w));
        }
        for (n, w) in names.iter().zip(&self.w_h) {
            out.push((format!("w_h{n}"), w));
        }
        for (n, b) in names.iter().zip(&self.b) {
            out.push((format!("b_{n}"), b));
        }
        if let Some(g) = &self.gate {
            out.push(("w_xa".into(), &g.w_xa));
            out.push(("w_ha".into(), &g.w_ha));
            out.push(("b_a".into(), &g.b_a));
        }
        out
    }

    /// Mutable view in the same order as [`named_tensors`](Self::named_tensors).
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        let mut out: Vec<&mut Tensor2> = Vec::new();
        out.extend(self.w_x.iter_mut());
        out.extend(self.w_h.iter_mut());
        out.extend(self.b.iter_mut());
        if let Some(g) = &mut self.gate {
            out.push(&mut g.w_xa);
            out.push(&mut g.w_ha);
            out.push(&mut g.b_a);
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

/// Recurrent state carried between timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    /// `N x B`
    pub h: Tensor2,
    /// LSTM cell state, `N x B`; `None` for other kinds.
    pub c: Option<Tensor2>,
}

impl StepState {
    pub fn zeros(kind: CellKind, hidden_dim: usize, batch: usize) -> Self {
        Self {
            h: Tensor2::zeros(hidden_dim, batch),
            c: (kind == CellKind::Lstm).then(|| Tensor2::zeros(hidden_dim, batch)),
        }
    }
}

use super::slots::*;
use super::{CellKind, CellParams, GateActivation, GateParams, StepState};
use crate::error::{shape_err, Error, Result};
use crate::numerics::{sigmoid, softmax_cols, Tensor2};

/// Intermediate activations of one kind-specific step.
#[derive(Debug, Clone)]
pub enum StepCache {
    Srnn { h: Tensor2 },
    Lstm {
        i: Tensor2,
        f: Tensor2,
        /// Candidate `tanh(W_xc·x + W_hc·h + b_c)`.
        g: Tensor2,
        o: Tensor2,
        tanh_c: Tensor2,
    },
    Gru {
        r: Tensor2,
        z: Tensor2,
        /// Candidate state `h'`.
        cand: Tensor2,
        /// `r ⊙ h_prev`
        rh: Tensor2,
    },
}

/// Everything one block step produced, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct BlockCache {
    pub x: Tensor2,
    /// Gate response, when a gate is attached.
    pub a: Option<Tensor2>,
    /// Input actually consumed by the block (`a ⊙ x` or `x`).
    pub x_eff: Tensor2,
    pub prev: StepState,
    pub step: StepCache,
    pub next: StepState,
}

fn check_state(x: &Tensor2, s: &StepState, p: &CellParams) -> Result<()> {
    if x.rows() != p.input_dim {
        return shape_err("block input", x.shape(), (p.input_dim, x.cols()));
    }
    if s.h.shape() != (p.hidden_dim, x.cols()) {
        return shape_err("block state", s.h.shape(), (p.hidden_dim, x.cols()));
    }
    match (p.kind, &s.c) {
        (CellKind::Lstm, Some(c)) if c.shape() == s.h.shape() => Ok(()),
        (CellKind::Lstm, Some(c)) => shape_err("lstm cell state", c.shape(), s.h.shape()),
        (CellKind::Lstm, None) => Err(Error::InvalidArgument(
            "lstm step requires a cell state".into(),
        )),
        _ => Ok(()),
    }
}

fn check_kind(p: &CellParams, kind: CellKind) -> Result<()> {
    if p.kind != kind {
        return Err(Error::InvalidArgument(format!(
            "{} step called with {} parameters",
            kind, p.kind
        )));
    }
    Ok(())
}

/// `W_x[k]·x + W_h[k]·h + b[k]`
fn preact(p: &CellParams, k: usize, x: &Tensor2, h: &Tensor2) -> Result<Tensor2> {
    Tensor2::matmul(&p.w_x[k], x)?
        .add(&Tensor2::matmul(&p.w_h[k], h)?)?
        .add_col(&p.b[k])
}

/// Gate response `a = φ(W_xa·x + W_ha·h_prev + b_a)`, one column per batch
/// element. Softmax mode normalizes over the input elements of each column.
pub fn gate_forward(x: &Tensor2, h_prev: &Tensor2, g: &GateParams) -> Result<Tensor2> {
    if x.rows() != g.w_xa.cols() {
        return shape_err("gate input", x.shape(), g.w_xa.shape());
    }
    if h_prev.rows() != g.w_ha.cols() || h_prev.cols() != x.cols() {
        return shape_err("gate state", h_prev.shape(), (g.w_ha.cols(), x.cols()));
    }
    let pre = Tensor2::matmul(&g.w_xa, x)?
        .add(&Tensor2::matmul(&g.w_ha, h_prev)?)?
        .add_col(&g.b_a)?;
    Ok(match g.activation {
        GateActivation::Sigmoid => pre.map(sigmoid),
        GateActivation::Softmax => softmax_cols(&pre),
    })
}

/// `x̃ = a ⊙ x`
pub fn modulate(x: &Tensor2, a: &Tensor2) -> Result<Tensor2> {
    a.hadamard(x)
}

fn srnn_forward(x: &Tensor2, s: &StepState, p: &CellParams) -> Result<(StepState, StepCache)> {
    let h = preact(p, SRNN_H, x, &s.h)?.map(f64::tanh);
    Ok((StepState { h: h.clone(), c: None }, StepCache::Srnn { h }))
}

fn lstm_forward(x: &Tensor2, s: &StepState, p: &CellParams) -> Result<(StepState, StepCache)> {
    let c_prev = s
        .c
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("lstm step requires a cell state".into()))?;
    let i = preact(p, LSTM_I, x, &s.h)?.map(sigmoid);
    let f = preact(p, LSTM_F, x, &s.h)?.map(sigmoid);
    let g = preact(p, LSTM_C, x, &s.h)?.map(f64::tanh);
    let o = preact(p, LSTM_O, x, &s.h)?.map(sigmoid);
    let c = f.hadamard(c_prev)?.add(&i.hadamard(&g)?)?;
    let tanh_c = c.map(f64::tanh);
    let h = o.hadamard(&tanh_c)?;
    Ok((
        StepState { h, c: Some(c) },
        StepCache::Lstm { i, f, g, o, tanh_c },
    ))
}

fn gru_forward(x: &Tensor2, s: &StepState, p: &CellParams) -> Result<(StepState, StepCache)> {
    let r = preact(p, GRU_R, x, &s.h)?.map(sigmoid);
    let z = preact(p, GRU_Z, x, &s.h)?.map(sigmoid);
    let rh = r.hadamard(&s.h)?;
    let cand = preact(p, GRU_H, x, &rh)?.map(f64::tanh);
    let h = z.hadamard(&s.h)?.add(&z.one_minus().hadamard(&cand)?)?;
    Ok((StepState { h, c: None }, StepCache::Gru { r, z, cand, rh }))
}

fn kind_forward(x: &Tensor2, s: &StepState, p: &CellParams) -> Result<(StepState, StepCache)> {
    check_state(x, s, p)?;
    match p.kind {
        CellKind::Srnn => srnn_forward(x, s, p),
        CellKind::Lstm => lstm_forward(x, s, p),
        CellKind::Gru => gru_forward(x, s, p),
    }
}

/// `h_t = tanh(W_xh·x + W_hh·h_{t-1} + b_h)`
pub fn srnn_step(x_eff: &Tensor2, s: &StepState, p: &CellParams) -> Result<StepState> {
    check_kind(p, CellKind::Srnn)?;
    kind_forward(x_eff, s, p).map(|(next, _)| next)
}

/// Standard LSTM without peepholes.
pub fn lstm_step(x_eff: &Tensor2, s: &StepState, p: &CellParams) -> Result<StepState> {
    check_kind(p, CellKind::Lstm)?;
    kind_forward(x_eff, s, p).map(|(next, _)| next)
}

/// GRU with the reset gate applied before the recurrent matrix:
/// `h' = tanh(W_xh·x + W_hh·(r ⊙ h_{t-1}) + b_h)`, `h_t = z ⊙ h_{t-1} + (1-z) ⊙ h'`.
pub fn gru_step(x_eff: &Tensor2, s: &StepState, p: &CellParams) -> Result<StepState> {
    check_kind(p, CellKind::Gru)?;
    kind_forward(x_eff, s, p).map(|(next, _)| next)
}

/// Full block step with all intermediates retained.
pub fn block_forward(x: &Tensor2, s: &StepState, p: &CellParams) -> Result<BlockCache> {
    check_state(x, s, p)?;
    let (a, x_eff) = match &p.gate {
        Some(g) => {
            let a = gate_forward(x, &s.h, g)?;
            let x_eff = modulate(x, &a)?;
            (Some(a), x_eff)
        }
        None => (None, x.clone()),
    };
    let (next, step) = kind_forward(&x_eff, s, p)?;
    Ok(BlockCache {
        x: x.clone(),
        a,
        x_eff,
        prev: s.clone(),
        step,
        next,
    })
}

/// Gate (if any), modulation, then the kind-specific step. Returns the new
/// state and the gate response.
pub fn block_step(
    x: &Tensor2,
    s: &StepState,
    p: &CellParams,
) -> Result<(StepState, Option<Tensor2>)> {
    let cache = block_forward(x, s, p)?;
    Ok((cache.next, cache.a))
}

//! Per-sequence scalar-loop forward pass, generic over the number type.
//!
//! It shares no code with the batched [`Tensor2`](crate::numerics::Tensor2)
//! path: each sequence runs for exactly its own length instead of being
//! padded. The finite-difference oracle evaluates it in double-double so
//! that rounding in the forward pass stays far below the difference being
//! measured.

use std::ops::{Add, Div, Mul, Neg, Sub};

use super::DropoutMasks;
use crate::cells::slots::*;
use crate::cells::{CellKind, CellParams, GateActivation};
use crate::data::SequenceBatch;
use crate::error::{Error, Result};
use crate::model::{Network, Readout};
use crate::numerics::{sigmoid, DoubleDouble};

pub trait Real:
    Copy
    + PartialOrd
    + From<f64>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn exp(self) -> Self;
    fn tanh(self) -> Self;
    fn sigmoid(self) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f64 {
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn sigmoid(self) -> Self {
        sigmoid(self)
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl Real for DoubleDouble {
    fn exp(self) -> Self {
        DoubleDouble::exp(self)
    }
    fn tanh(self) -> Self {
        DoubleDouble::tanh(self)
    }
    fn sigmoid(self) -> Self {
        DoubleDouble::sigmoid(self)
    }
    fn to_f64(self) -> f64 {
        DoubleDouble::to_f64(self)
    }
}

/// `W_x[k]·x + W_h[k]·h + b[k]` for one hidden unit `n`.
fn unit_preact<R: Real>(p: &CellParams, k: usize, n: usize, x: &[R], h: &[R]) -> R {
    let mut s = R::from(p.b[k].get(n, 0));
    for (d, &xd) in x.iter().enumerate() {
        s = s + R::from(p.w_x[k].get(n, d)) * xd;
    }
    for (m, &hm) in h.iter().enumerate() {
        s = s + R::from(p.w_h[k].get(n, m)) * hm;
    }
    s
}

fn modulate<R: Real>(p: &CellParams, x: &[R], h: &[R]) -> Vec<R> {
    let Some(g) = &p.gate else {
        return x.to_vec();
    };
    let pre: Vec<R> = (0..x.len())
        .map(|i| {
            let mut s = R::from(g.b_a.get(i, 0));
            for (d, &xd) in x.iter().enumerate() {
                s = s + R::from(g.w_xa.get(i, d)) * xd;
            }
            for (m, &hm) in h.iter().enumerate() {
                s = s + R::from(g.w_ha.get(i, m)) * hm;
            }
            s
        })
        .collect();
    let a: Vec<R> = match g.activation {
        GateActivation::Sigmoid => pre.iter().map(|&s| s.sigmoid()).collect(),
        GateActivation::Softmax => {
            let max = pre
                .iter()
                .copied()
                .fold(pre[0], |m, v| if v > m { v } else { m });
            let e: Vec<R> = pre.iter().map(|&s| (s - max).exp()).collect();
            let total = e.iter().fold(R::from(0.0), |acc, &v| acc + v);
            e.iter().map(|&v| v / total).collect()
        }
    };
    a.iter().zip(x).map(|(&ai, &xi)| ai * xi).collect()
}

/// One block step on a single sequence: returns `(h, c)`.
fn step<R: Real>(p: &CellParams, x: &[R], h: &[R], c: &[R]) -> (Vec<R>, Vec<R>) {
    let x = modulate(p, x, h);
    let one = R::from(1.0);
    let n_hidden = p.hidden_dim;
    match p.kind {
        CellKind::Srnn => {
            let h = (0..n_hidden)
                .map(|n| unit_preact(p, SRNN_H, n, &x, h).tanh())
                .collect();
            (h, Vec::new())
        }
        CellKind::Lstm => {
            let mut h_new = Vec::with_capacity(n_hidden);
            let mut c_new = Vec::with_capacity(n_hidden);
            for n in 0..n_hidden {
                let i = unit_preact(p, LSTM_I, n, &x, h).sigmoid();
                let f = unit_preact(p, LSTM_F, n, &x, h).sigmoid();
                let g = unit_preact(p, LSTM_C, n, &x, h).tanh();
                let o = unit_preact(p, LSTM_O, n, &x, h).sigmoid();
                let cn = f * c[n] + i * g;
                h_new.push(o * cn.tanh());
                c_new.push(cn);
            }
            (h_new, c_new)
        }
        CellKind::Gru => {
            let r: Vec<R> = (0..n_hidden)
                .map(|n| unit_preact(p, GRU_R, n, &x, h).sigmoid())
                .collect();
            let rh: Vec<R> = r.iter().zip(h).map(|(&r, &h)| r * h).collect();
            let h_new = (0..n_hidden)
                .map(|n| {
                    let z = unit_preact(p, GRU_Z, n, &x, h).sigmoid();
                    let cand = unit_preact(p, GRU_H, n, &x, &rh).tanh();
                    z * h[n] + (one - z) * cand
                })
                .collect();
            (h_new, Vec::new())
        }
    }
}

/// Logits of every sequence in `batch`, `logits[j][k]`.
pub fn reference_logits<R: Real>(
    net: &Network,
    batch: &SequenceBatch,
    masks: Option<&DropoutMasks>,
) -> Result<Vec<Vec<R>>> {
    if batch.dim() != net.input_dim() {
        return Err(Error::InvalidArgument(format!(
            "batch dimension {} does not match network input {}",
            batch.dim(),
            net.input_dim()
        )));
    }
    if let Some(m) = masks {
        if m.layers.len() != net.layers.len()
            || m.layers.iter().zip(&net.layers).any(|(m, l)| m.shape() != (l.hidden_dim, batch.len()))
        {
            return Err(Error::InvalidArgument("dropout masks do not match the batch".into()));
        }
    }
    let mut out = Vec::with_capacity(batch.len());
    for (j, seq) in batch.inputs().iter().enumerate() {
        let len = seq.cols();
        if len == 0 {
            return Err(Error::EmptySequence);
        }
        let mut frames: Vec<Vec<R>> = (0..len)
            .map(|t| (0..seq.rows()).map(|d| R::from(seq.get(d, t))).collect())
            .collect();
        for (l, p) in net.layers.iter().enumerate() {
            let mut h = vec![R::from(0.0); p.hidden_dim];
            let mut c = vec![R::from(0.0); p.hidden_dim];
            for frame in frames.iter_mut() {
                let (h_new, c_new) = step(p, frame, &h, &c);
                h = h_new;
                if p.kind == CellKind::Lstm {
                    c = c_new;
                }
                *frame = match masks {
                    Some(m) => h
                        .iter()
                        .enumerate()
                        .map(|(n, &v)| v * R::from(m.layers[l].get(n, j)))
                        .collect(),
                    None => h.clone(),
                };
            }
        }
        let top = frames[0].len();
        let readout: Vec<R> = match net.config().readout {
            Readout::FinalStep => frames[len - 1].clone(),
            Readout::MeanOverTime => (0..top)
                .map(|n| {
                    let sum = frames.iter().fold(R::from(0.0), |acc, f| acc + f[n]);
                    sum / R::from(len as f64)
                })
                .collect(),
        };
        let logits = (0..net.num_classes())
            .map(|k| {
                readout
                    .iter()
                    .enumerate()
                    .fold(R::from(net.fc_b.get(k, 0)), |acc, (n, &r)| {
                        acc + R::from(net.fc_w.get(k, n)) * r
                    })
            })
            .collect();
        out.push(logits);
    }
    Ok(out)
}

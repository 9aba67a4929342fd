//! Reverse-mode derivative of a single block step.

use crate::cells::slots::*;
use crate::cells::{BlockCache, CellParams, GateActivation, StepCache};
use crate::error::Result;
use crate::numerics::Tensor2;

pub(super) struct StepGrad {
    pub dx: Tensor2,
    pub dh_prev: Tensor2,
    pub dc_prev: Option<Tensor2>,
}

/// Accumulates the gradients of `W_x[k]`, `W_h[k]`, `b[k]` given the
/// gradient `ds` of the slot's pre-activation, and returns `(dx, dh_in)`
/// where `h_in` is the recurrent input the slot multiplied.
fn slot_backward(
    p: &CellParams,
    g: &mut CellParams,
    k: usize,
    ds: &Tensor2,
    x: &Tensor2,
    h_in: &Tensor2,
) -> Result<(Tensor2, Tensor2)> {
    g.w_x[k].add_assign(&Tensor2::matmul_nt(ds, x)?)?;
    g.w_h[k].add_assign(&Tensor2::matmul_nt(ds, h_in)?)?;
    g.b[k].add_assign(&ds.row_sums())?;
    Ok((
        Tensor2::matmul_tn(&p.w_x[k], ds)?,
        Tensor2::matmul_tn(&p.w_h[k], ds)?,
    ))
}

fn sigmoid_grad(dy: &Tensor2, y: &Tensor2) -> Result<Tensor2> {
    dy.hadamard(&y.map(|v| v * (1.0 - v)))
}

fn tanh_grad(dy: &Tensor2, y: &Tensor2) -> Result<Tensor2> {
    dy.hadamard(&y.map(|v| 1.0 - v * v))
}

pub(super) fn block_backward(
    p: &CellParams,
    cache: &BlockCache,
    dh: &Tensor2,
    dc: Option<&Tensor2>,
    g: &mut CellParams,
) -> Result<StepGrad> {
    let x = &cache.x_eff;
    let h_prev = &cache.prev.h;
    let (mut dx_eff, mut dh_prev, dc_prev) = match &cache.step {
        StepCache::Srnn { h } => {
            let ds = tanh_grad(dh, h)?;
            let (dx, dhp) = slot_backward(p, g, SRNN_H, &ds, x, h_prev)?;
            (dx, dhp, None)
        }
        StepCache::Gru { r, z, cand, rh } => {
            let dz = dh.hadamard(&h_prev.sub(cand)?)?;
            let mut dhp = dh.hadamard(z)?;
            let dcand = dh.hadamard(&z.one_minus())?;

            let ds_h = tanh_grad(&dcand, cand)?;
            let (mut dx, drh) = slot_backward(p, g, GRU_H, &ds_h, x, rh)?;
            let dr = drh.hadamard(h_prev)?;
            dhp.add_assign(&drh.hadamard(r)?)?;

            let ds_z = sigmoid_grad(&dz, z)?;
            let (dxz, dhz) = slot_backward(p, g, GRU_Z, &ds_z, x, h_prev)?;
            dx.add_assign(&dxz)?;
            dhp.add_assign(&dhz)?;

            let ds_r = sigmoid_grad(&dr, r)?;
            let (dxr, dhr) = slot_backward(p, g, GRU_R, &ds_r, x, h_prev)?;
            dx.add_assign(&dxr)?;
            dhp.add_assign(&dhr)?;
            (dx, dhp, None)
        }
        StepCache::Lstm { i, f, g: cand, o, tanh_c } => {
            let c_prev = cache.prev.c.as_ref().expect("lstm cache carries cell state");
            let d_o = dh.hadamard(tanh_c)?;
            let mut dc_total = tanh_grad(&dh.hadamard(o)?, tanh_c)?;
            if let Some(dc) = dc {
                dc_total.add_assign(dc)?;
            }
            let d_f = dc_total.hadamard(c_prev)?;
            let dcp = dc_total.hadamard(f)?;
            let d_i = dc_total.hadamard(cand)?;
            let d_g = dc_total.hadamard(i)?;

            let mut dx = Tensor2::zeros(x.rows(), x.cols());
            let mut dhp = Tensor2::zeros(h_prev.rows(), h_prev.cols());
            let slots = [
                (LSTM_I, sigmoid_grad(&d_i, i)?),
                (LSTM_F, sigmoid_grad(&d_f, f)?),
                (LSTM_C, tanh_grad(&d_g, cand)?),
                (LSTM_O, sigmoid_grad(&d_o, o)?),
            ];
            for (k, ds) in &slots {
                let (dxk, dhk) = slot_backward(p, g, *k, ds, x, h_prev)?;
                dx.add_assign(&dxk)?;
                dhp.add_assign(&dhk)?;
            }
            (dx, dhp, Some(dcp))
        }
    };

    let dx = match (&p.gate, &cache.a) {
        (Some(gate), Some(a)) => {
            // x_eff = a ⊙ x: both factors depend on parameters.
            let da = dx_eff.hadamard(&cache.x)?;
            let dx = dx_eff.hadamard(a)?;
            let ds = match gate.activation {
                GateActivation::Sigmoid => sigmoid_grad(&da, a)?,
                GateActivation::Softmax => softmax_grad(&da, a),
            };
            let gg = g.gate.as_mut().expect("gradient accumulator mirrors the gate");
            gg.w_xa.add_assign(&Tensor2::matmul_nt(&ds, &cache.x)?)?;
            gg.w_ha.add_assign(&Tensor2::matmul_nt(&ds, h_prev)?)?;
            gg.b_a.add_assign(&ds.row_sums())?;
            dh_prev.add_assign(&Tensor2::matmul_tn(&gate.w_ha, &ds)?)?;
            dx_eff = dx.add(&Tensor2::matmul_tn(&gate.w_xa, &ds)?)?;
            dx_eff
        }
        _ => dx_eff,
    };
    Ok(StepGrad {
        dx,
        dh_prev,
        dc_prev,
    })
}

/// Column-wise softmax Jacobian-vector product: `a ⊙ (da - Σ a·da)`.
fn softmax_grad(da: &Tensor2, a: &Tensor2) -> Tensor2 {
    let mut out = Tensor2::zeros(a.rows(), a.cols());
    for j in 0..a.cols() {
        let dot: f64 = (0..a.rows()).map(|i| a.get(i, j) * da.get(i, j)).sum();
        for i in 0..a.rows() {
            out.set(i, j, a.get(i, j) * (da.get(i, j) - dot));
        }
    }
    out
}

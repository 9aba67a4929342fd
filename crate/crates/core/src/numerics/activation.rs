use super::Tensor2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    /// Softmax over each row.
    SoftmaxRows,
}

/// Largest `f64` below one.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Numerically stable logistic function. Saturated values are pulled back
/// inside the open unit interval, so the result is never exactly 0 or 1.
#[inline]
pub fn sigmoid(s: f64) -> f64 {
    let y = if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    };
    y.clamp(f64::MIN_POSITIVE, BELOW_ONE)
}

pub fn activation(v: &Tensor2, kind: Activation) -> Tensor2 {
    match kind {
        Activation::Sigmoid => v.map(sigmoid),
        Activation::Tanh => v.map(f64::tanh),
        Activation::SoftmaxRows => softmax_rows(v),
    }
}

fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in xs.iter_mut() {
        *x /= total;
    }
}

pub fn softmax_rows(v: &Tensor2) -> Tensor2 {
    let mut out = v.clone();
    let cols = v.cols();
    if cols > 0 {
        for row in out.data_mut().chunks_mut(cols) {
            softmax_in_place(row);
        }
    }
    out
}

/// Softmax over each column; used where a batch is laid out column-wise.
pub fn softmax_cols(v: &Tensor2) -> Tensor2 {
    let mut out = v.clone();
    let mut buf = vec![0.0; v.rows()];
    for c in 0..v.cols() {
        for (r, b) in buf.iter_mut().enumerate() {
            *b = v.get(r, c);
        }
        softmax_in_place(&mut buf);
        out.set_col(c, &buf);
    }
    out
}

//! Unrolled forward pass over a padded batch and exact reverse-mode
//! gradients through time.
//!
//! Sequences in a batch are padded to the longest one. Past its true
//! length a sequence's state is copied forward unchanged, so padded steps
//! neither alter the readout nor receive gradient.

use crate::cells::{block_forward, BlockCache, CellKind, StepState};
use crate::data::SequenceBatch;
use crate::error::{Error, Result};
use crate::model::{Network, Readout};
use crate::numerics::{RngStream, Tensor2};

pub mod gradcheck;
pub mod reference;
mod step_grad;

pub use gradcheck::{finite_diff_grad, network_finite_diff, relative_error};

/// Inverted-dropout masks, one `N_l x B` matrix per recurrent layer, reused
/// at every timestep of the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub layers: Vec<Tensor2>,
}

impl DropoutMasks {
    /// Entries are `0` with probability `p`, else `1/(1-p)`.
    pub fn sample(net: &Network, batch: usize, p: f64, rng: &mut RngStream) -> Self {
        let keep = 1.0 / (1.0 - p);
        let layers = net
            .layers
            .iter()
            .map(|layer| {
                let mut m = Tensor2::zeros(layer.hidden_dim, batch);
                for v in m.data_mut() {
                    *v = if rng.bernoulli(p) { 0.0 } else { keep };
                }
                m
            })
            .collect();
        Self { layers }
    }

    pub fn ones(net: &Network, batch: usize) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Tensor2::filled(l.hidden_dim, batch, 1.0))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    Eval,
    Train(&'a DropoutMasks),
}

/// Batch laid out as one `D x B` matrix per timestep.
#[derive(Debug, Clone)]
pub struct PaddedBatch {
    pub steps: Vec<Tensor2>,
    pub lengths: Vec<usize>,
}

impl PaddedBatch {
    pub fn from_batch(batch: &SequenceBatch) -> Result<Self> {
        if batch.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let lengths = batch.lengths();
        if lengths.contains(&0) {
            return Err(Error::EmptySequence);
        }
        let t_max = batch.max_len();
        let (d, b) = (batch.dim(), batch.len());
        let mut steps = vec![Tensor2::zeros(d, b); t_max];
        for (j, x) in batch.inputs().iter().enumerate() {
            for (t, step) in steps.iter_mut().enumerate().take(x.cols()) {
                for i in 0..d {
                    step.set(i, j, x.get(i, t));
                }
            }
        }
        Ok(Self { steps, lengths })
    }

    pub fn batch_size(&self) -> usize {
        self.lengths.len()
    }

    /// Which columns hold a real frame at step `t`.
    pub fn active(&self, t: usize) -> Vec<bool> {
        self.lengths.iter().map(|&len| t < len).collect()
    }
}

/// Per-timestep caches of one recurrent layer.
#[derive(Debug, Clone)]
pub struct LayerCache {
    pub steps: Vec<BlockCache>,
    /// Layer output after dropout, i.e. what the next layer (or the readout)
    /// consumes.
    pub outputs: Vec<Tensor2>,
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub layers: Vec<LayerCache>,
    pub lengths: Vec<usize>,
    /// Top-layer representation fed to the classifier, `N_top x B`.
    pub readout: Tensor2,
    /// `K x B`
    pub logits: Tensor2,
    masks: Option<DropoutMasks>,
}

/// Replaces inactive columns of `next` with the corresponding columns of
/// `prev`.
fn hold_inactive(next: &mut Tensor2, prev: &Tensor2, active: &[bool]) {
    if active.iter().all(|&a| a) {
        return;
    }
    let cols = next.cols();
    for r in 0..next.rows() {
        for (j, &on) in active.iter().enumerate() {
            if !on {
                next.data_mut()[r * cols + j] = prev.get(r, j);
            }
        }
    }
}

/// Splits a column-batched tensor into (active columns, inactive columns).
fn split_active(t: &Tensor2, active: &[bool]) -> (Tensor2, Tensor2) {
    let mut on = t.clone();
    let mut off = Tensor2::zeros(t.rows(), t.cols());
    let cols = t.cols();
    for r in 0..t.rows() {
        for (j, &a) in active.iter().enumerate() {
            if !a {
                on.data_mut()[r * cols + j] = 0.0;
                off.data_mut()[r * cols + j] = t.get(r, j);
            }
        }
    }
    (on, off)
}

/// Runs every layer over the whole batch and applies the classifier.
pub fn unroll_forward(net: &Network, batch: &SequenceBatch, mode: Mode<'_>) -> Result<ForwardPass> {
    if batch.dim() != net.input_dim() {
        return Err(Error::ShapeMismatch {
            op: "network input",
            left: (batch.dim(), batch.len()),
            right: (net.input_dim(), batch.len()),
        });
    }
    let padded = PaddedBatch::from_batch(batch)?;
    forward_padded(net, &padded, mode)
}

pub fn forward_padded(net: &Network, padded: &PaddedBatch, mode: Mode<'_>) -> Result<ForwardPass> {
    let b = padded.batch_size();
    let t_max = padded.steps.len();
    let masks = match mode {
        Mode::Eval => None,
        Mode::Train(m) => {
            if m.layers.len() != net.layers.len()
                || m.layers.iter().zip(&net.layers).any(|(m, l)| m.shape() != (l.hidden_dim, b))
            {
                return Err(Error::InvalidArgument("dropout masks do not match the batch".into()));
            }
            Some(m.clone())
        }
    };

    let actives: Vec<Vec<bool>> = (0..t_max).map(|t| padded.active(t)).collect();
    let mut layer_caches: Vec<LayerCache> = Vec::with_capacity(net.layers.len());
    for (l, params) in net.layers.iter().enumerate() {
        let inputs: &[Tensor2] = match layer_caches.last() {
            Some(prev) => &prev.outputs,
            None => &padded.steps,
        };
        let mut state = StepState::zeros(params.kind, params.hidden_dim, b);
        let mut steps = Vec::with_capacity(t_max);
        let mut outputs = Vec::with_capacity(t_max);
        for (t, x) in inputs.iter().enumerate() {
            let mut cache = block_forward(x, &state, params)?;
            hold_inactive(&mut cache.next.h, &state.h, &actives[t]);
            if let (Some(c), Some(c_prev)) = (&mut cache.next.c, &state.c) {
                hold_inactive(c, c_prev, &actives[t]);
            }
            state = cache.next.clone();
            let out = match &masks {
                Some(m) => state.h.hadamard(&m.layers[l])?,
                None => state.h.clone(),
            };
            outputs.push(out);
            steps.push(cache);
        }
        layer_caches.push(LayerCache { steps, outputs });
    }

    let top = layer_caches.last().expect("validated: at least one layer");
    let readout = match net.config().readout {
        Readout::FinalStep => top.outputs[t_max - 1].clone(),
        Readout::MeanOverTime => {
            let mut acc = Tensor2::zeros(net.config().top_hidden_dim(), b);
            for (t, out) in top.outputs.iter().enumerate() {
                let (on, _) = split_active(out, &actives[t]);
                acc.add_assign(&on)?;
            }
            for (j, &len) in padded.lengths.iter().enumerate() {
                let col: Vec<f64> = acc.col(j).iter().map(|v| v / len as f64).collect();
                acc.set_col(j, &col);
            }
            acc
        }
    };
    let logits = Tensor2::matmul(&net.fc_w, &readout)?.add_col(&net.fc_b)?;
    Ok(ForwardPass {
        layers: layer_caches,
        lengths: padded.lengths.clone(),
        readout,
        logits,
        masks,
    })
}

/// Mean cross-entropy of softmax(logits) and its gradient w.r.t. logits.
pub fn cross_entropy(logits: &Tensor2, labels: &[usize]) -> Result<(f64, Tensor2)> {
    let (k, b) = logits.shape();
    if labels.len() != b {
        return Err(Error::InvalidArgument(format!(
            "{} labels for a batch of {b}",
            labels.len()
        )));
    }
    let mut grad = Tensor2::zeros(k, b);
    let mut loss = 0.0;
    for (j, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(Error::InvalidArgument(format!("label {y} out of range")));
        }
        let col = logits.col(j);
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = col.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum_exp.ln();
        loss += log_z - col[y];
        for (i, &v) in col.iter().enumerate() {
            let p = (v - log_z).exp();
            let target = if i == y { 1.0 } else { 0.0 };
            grad.set(i, j, (p - target) / b as f64);
        }
    }
    Ok((loss / b as f64, grad))
}

/// One gradient tensor per network parameter, in
/// [`Network::named_params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub names: Vec<String>,
    pub tensors: Vec<Tensor2>,
}

impl GradientSet {
    pub fn from_network(grads: Network) -> Self {
        let names = grads.named_params().into_iter().map(|(n, _)| n).collect();
        let mut grads = grads;
        let tensors = grads.params_mut().into_iter().map(|t| t.clone()).collect();
        Self { names, tensors }
    }

    pub fn zeros_for(net: &Network) -> Self {
        Self::from_network(net.zeros_like())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor2::is_finite)
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors.iter().map(Tensor2::max_abs).fold(0.0, f64::max)
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.data().iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor2> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }
}

/// Loss and exact gradients for a completed forward pass.
pub fn backward(net: &Network, pass: &ForwardPass, labels: &[usize]) -> Result<(f64, GradientSet)> {
    if labels.len() != pass.lengths.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for a pass over {} sequences",
            labels.len(),
            pass.lengths.len()
        )));
    }
    if pass.layers.len() != net.layers.len() {
        return Err(Error::InvalidArgument("cache does not belong to this network".into()));
    }
    let (loss, dlogits) = cross_entropy(&pass.logits, labels)?;
    let mut grads = net.zeros_like();
    grads.fc_w = Tensor2::matmul_nt(&dlogits, &pass.readout)?;
    grads.fc_b = dlogits.row_sums();
    let d_readout = Tensor2::matmul_tn(&net.fc_w, &dlogits)?;

    let t_max = pass.layers[0].steps.len();
    let b = pass.lengths.len();
    let actives: Vec<Vec<bool>> = (0..t_max)
        .map(|t| pass.lengths.iter().map(|&len| t < len).collect())
        .collect();

    // Gradient w.r.t. each output of the current layer.
    let top_n = net.config().top_hidden_dim();
    let mut d_out: Vec<Tensor2> = vec![Tensor2::zeros(top_n, b); t_max];
    match net.config().readout {
        Readout::FinalStep => d_out[t_max - 1] = d_readout,
        Readout::MeanOverTime => {
            for (t, d) in d_out.iter_mut().enumerate() {
                for (j, &len) in pass.lengths.iter().enumerate() {
                    if t < len {
                        for i in 0..top_n {
                            d.set(i, j, d_readout.get(i, j) / len as f64);
                        }
                    }
                }
            }
        }
    }

    for l in (0..net.layers.len()).rev() {
        let params = &net.layers[l];
        let cache = &pass.layers[l];
        if let Some(m) = &pass.masks {
            for d in d_out.iter_mut() {
                *d = d.hadamard(&m.layers[l])?;
            }
        }
        let g = &mut grads.layers[l];
        let mut dh_next = Tensor2::zeros(params.hidden_dim, b);
        let mut dc_next = (params.kind == CellKind::Lstm).then(|| Tensor2::zeros(params.hidden_dim, b));
        let mut d_in: Vec<Tensor2> = Vec::with_capacity(t_max);
        for t in (0..t_max).rev() {
            let dh = d_out[t].add(&dh_next)?;
            let (dh_on, dh_off) = split_active(&dh, &actives[t]);
            let (dc_on, dc_off) = match &dc_next {
                Some(dc) => {
                    let (on, off) = split_active(dc, &actives[t]);
                    (Some(on), Some(off))
                }
                None => (None, None),
            };
            let sg = step_grad::block_backward(params, &cache.steps[t], &dh_on, dc_on.as_ref(), g)?;
            dh_next = sg.dh_prev.add(&dh_off)?;
            dc_next = match (sg.dc_prev, dc_off) {
                (Some(dc), Some(off)) => Some(dc.add(&off)?),
                _ => None,
            };
            d_in.push(sg.dx);
        }
        d_in.reverse();
        d_out = d_in;
    }
    Ok((loss, GradientSet::from_network(grads)))
}

/// Forward in training mode with the given masks, then backward.
pub fn loss_and_grad(
    net: &Network,
    batch: &SequenceBatch,
    masks: Option<&DropoutMasks>,
) -> Result<(f64, GradientSet, ForwardPass)> {
    let mode = match masks {
        Some(m) => Mode::Train(m),
        None => Mode::Eval,
    };
    let pass = unroll_forward(net, batch, mode)?;
    let (loss, grads) = backward(net, &pass, batch.labels())?;
    Ok((loss, grads, pass))
}

/// Mean cross-entropy without gradients.
pub fn loss(net: &Network, batch: &SequenceBatch, masks: Option<&DropoutMasks>) -> Result<f64> {
    let mode = match masks {
        Some(m) => Mode::Train(m),
        None => Mode::Eval,
    };
    let pass = unroll_forward(net, batch, mode)?;
    cross_entropy(&pass.logits, batch.labels()).map(|(l, _)| l)
}

//! Central finite differences and the gradient-check harness that compares
//! them with [`backward`](super::backward).

use super::reference::reference_logits;
use super::{loss_and_grad, DropoutMasks, GradientSet};
use crate::cells::{CellKind, GateActivation};
use crate::data::SequenceBatch;
use crate::error::{Error, Result};
use crate::model::{LayerSpec, Network, NetworkConfig, Readout};
use crate::numerics::{DoubleDouble, RngStream, Tensor2};

/// `|a - b| / max(1e-8, |a| + |b|)`
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
}

/// `(L(θ + ε e_i) - L(θ - ε e_i)) / 2ε` for every coordinate of `params`.
/// The denominator is the step actually taken after rounding `θ_i ± ε`.
pub fn finite_diff_grad<F>(mut loss_fn: F, params: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("step {eps} must be positive")));
    }
    let mut theta = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = theta[i];
        theta[i] = orig + eps;
        let up = loss_fn(&theta)?;
        theta[i] = orig - eps;
        let down = loss_fn(&theta)?;
        theta[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFiniteLoss { index: i });
        }
        out.push((up - down) / ((orig + eps) - (orig - eps)));
    }
    Ok(out)
}

fn flatten(net: &Network) -> Vec<f64> {
    net.named_params()
        .iter()
        .flat_map(|(_, t)| t.data().iter().copied())
        .collect()
}

fn unflatten(net: &mut Network, flat: &[f64]) {
    let mut offset = 0;
    for t in net.params_mut() {
        let n = t.len();
        t.data_mut().copy_from_slice(&flat[offset..offset + n]);
        offset += n;
    }
}

/// `L(θ) - L(θ₀)` for mean cross-entropy, evaluated from the logit shift
/// `d = z - z₀` as `log1p(Σ p₀ expm1(d)) - d_y` so that it carries no
/// rounding error at the scale of `L` itself.
fn loss_shift(base: &[Vec<f64>], shift: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for ((z0, d), &y) in base.iter().zip(shift).zip(labels) {
        let max = z0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z0.iter().map(|v| (v - max).exp()).sum();
        let acc: f64 = z0
            .iter()
            .zip(d)
            .map(|(v, dk)| (v - max).exp() / sum * dk.exp_m1())
            .sum();
        total += acc.ln_1p() - d[y];
    }
    total / labels.len() as f64
}

/// Finite-difference gradient of the mean batch loss w.r.t. every network
/// parameter, with dropout masks held fixed. Logits come from the
/// double-double [`reference_logits`], so the loss differences are resolved
/// well below `f64` rounding of the loss itself.
pub fn network_finite_diff(
    net: &Network,
    batch: &SequenceBatch,
    masks: Option<&DropoutMasks>,
    eps: f64,
) -> Result<GradientSet> {
    let base = flatten(net);
    let z0: Vec<Vec<DoubleDouble>> = reference_logits(net, batch, masks)?;
    let z0_f64: Vec<Vec<f64>> = z0
        .iter()
        .map(|col| col.iter().map(|v| v.to_f64()).collect())
        .collect();
    let mut probe = net.clone();
    let flat = finite_diff_grad(
        |theta| {
            unflatten(&mut probe, theta);
            let z: Vec<Vec<DoubleDouble>> = reference_logits(&probe, batch, masks)?;
            let shift: Vec<Vec<f64>> = z
                .iter()
                .zip(&z0)
                .map(|(col, col0)| col.iter().zip(col0).map(|(&a, &b)| (a - b).to_f64()).collect())
                .collect();
            Ok(loss_shift(&z0_f64, &shift, batch.labels()))
        },
        &base,
        eps,
    )?;
    let mut shaped = net.zeros_like();
    unflatten(&mut shaped, &flat);
    Ok(GradientSet::from_network(shaped))
}

/// One randomly drawn gradient-check problem.
#[derive(Debug, Clone)]
pub struct GradCheckCase {
    pub kind: CellKind,
    pub gated: bool,
    pub gate_activation: GateActivation,
    pub seed: u64,
    pub config: NetworkConfig,
    pub lengths: Vec<usize>,
    pub use_dropout: bool,
}

impl GradCheckCase {
    /// Small random problem: `D ≤ 5`, `N ≤ 6`, `T ≤ 4`, batch `≤ 3`, one or
    /// two layers, mixed sequence lengths, random readout and dropout.
    pub fn random(kind: CellKind, gated: bool, gate_activation: GateActivation, seed: u64) -> Self {
        let mut rng = RngStream::derive(seed, "gradcheck-case", kind as u64 * 2 + gated as u64);
        let input_dim = 1 + rng.below(5);
        let num_layers = 1 + rng.below(2);
        let batch = 1 + rng.below(3);
        let t_max = 1 + rng.below(4);
        let mut layers = Vec::new();
        for _ in 0..num_layers {
            layers.push(LayerSpec {
                kind,
                hidden_dim: 1 + rng.below(6),
                gated,
                gate_activation,
            });
        }
        let mut lengths: Vec<usize> = (0..batch).map(|_| 1 + rng.below(t_max)).collect();
        lengths[0] = t_max;
        let config = NetworkConfig {
            input_dim,
            num_classes: 2 + rng.below(3),
            layers,
            dropout: 0.5,
            readout: if rng.bernoulli(0.5) {
                Readout::FinalStep
            } else {
                Readout::MeanOverTime
            },
        };
        Self {
            kind,
            gated,
            gate_activation,
            seed,
            config,
            lengths,
            use_dropout: rng.bernoulli(0.5),
        }
    }

    pub fn label(&self) -> String {
        format!(
            "{}{} seed={} D={} N={:?} T={:?} readout={}{}",
            if self.gated { "eleatt-" } else { "" },
            self.kind,
            self.seed,
            self.config.input_dim,
            self.config.layers.iter().map(|l| l.hidden_dim).collect::<Vec<_>>(),
            self.lengths,
            self.config.readout,
            if self.use_dropout { " dropout" } else { "" },
        )
    }

    /// Default-initialized network with random (non-zero) biases, a random
    /// batch and optional masks.
    pub fn materialize(&self) -> Result<(Network, SequenceBatch, Option<DropoutMasks>)> {
        let mut net = Network::build(self.config.clone(), self.seed)?;
        let mut rng = RngStream::derive(self.seed, "gradcheck-data", 0);
        for layer in &mut net.layers {
            for b in &mut layer.b {
                *b = rng.uniform(-0.5, 0.5, b.rows(), 1)?;
            }
            if let Some(g) = &mut layer.gate {
                g.b_a = rng.uniform(-0.5, 0.5, g.b_a.rows(), 1)?;
            }
        }
        net.fc_b = rng.uniform(-0.5, 0.5, net.fc_b.rows(), 1)?;
        let k = self.config.num_classes;
        let inputs: Vec<Tensor2> = self
            .lengths
            .iter()
            .map(|&t| rng.uniform(-1.5, 1.5, self.config.input_dim, t))
            .collect::<Result<_>>()?;
        let labels = (0..inputs.len()).map(|_| rng.below(k)).collect();
        let batch = SequenceBatch::new(self.config.input_dim, k, inputs, labels)?;
        let masks = self
            .use_dropout
            .then(|| DropoutMasks::sample(&net, batch.len(), self.config.dropout, &mut rng));
        Ok((net, batch, masks))
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub case: String,
    /// Worst relative error per parameter tensor.
    pub per_tensor: Vec<(String, f64)>,
    pub worst: f64,
    pub num_params: usize,
}

impl GradCheckReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.worst < tol
    }
}

/// Compares analytic and numeric gradients tensor by tensor.
pub fn compare(analytic: &GradientSet, numeric: &GradientSet) -> Vec<(String, f64)> {
    analytic
        .names
        .iter()
        .zip(analytic.tensors.iter().zip(&numeric.tensors))
        .map(|(name, (a, n))| {
            let worst = a
                .data()
                .iter()
                .zip(n.data())
                .map(|(&x, &y)| relative_error(x, y))
                .fold(0.0, f64::max);
            (name.clone(), worst)
        })
        .collect()
}

/// Runs one case. `corrupt` perturbs one analytic gradient entry so the
/// harness's sensitivity can be verified.
pub fn run_case(case: &GradCheckCase, eps: f64, corrupt: bool) -> Result<GradCheckReport> {
    let (net, batch, masks) = case.materialize()?;
    let (_, mut analytic, _) = loss_and_grad(&net, &batch, masks.as_ref())?;
    if corrupt {
        let t = &mut analytic.tensors[0];
        t.data_mut()[0] += 1e-3 + 0.01 * t.data()[0].abs();
    }
    let numeric = network_finite_diff(&net, &batch, masks.as_ref(), eps)?;
    let per_tensor = compare(&analytic, &numeric);
    let worst = per_tensor.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    Ok(GradCheckReport {
        case: case.label(),
        per_tensor,
        worst,
        num_params: net.num_params(),
    })
}

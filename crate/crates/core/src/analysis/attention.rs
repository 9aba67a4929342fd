//! Gate responses recorded over a dataset, and relative attention.
//!
//! The relative response of element `i` divides the raw response by a
//! per-element static modulation factor `ā_i`: the ratio of the element's
//! average energy after modulation (`a_i x_i`) to its average energy before.
//! Elements with large raw magnitudes are thus compared on an equal footing.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::bptt::{unroll_forward, Mode};
use crate::data::SequenceBatch;
use crate::error::{Error, Result};
use crate::model::Network;
use crate::numerics::Tensor2;

/// Responses of one gated layer, stored per sequence as `D x T_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    pub layer: usize,
    pub responses: Vec<Tensor2>,
    /// The layer's input at the same steps (the raw sequences for layer 0).
    pub inputs: Vec<Tensor2>,
}

impl LayerTrace {
    pub fn dim(&self) -> usize {
        self.responses.first().map_or(0, Tensor2::rows)
    }

    /// `(T_max, D, batch)`
    pub fn shape(&self) -> (usize, usize, usize) {
        let t = self.responses.iter().map(Tensor2::cols).max().unwrap_or(0);
        (t, self.dim(), self.responses.len())
    }

    /// Response of element `i` at step `t` of sequence `j`; `None` past the
    /// sequence's end.
    pub fn response(&self, t: usize, i: usize, j: usize) -> Option<f64> {
        let r = &self.responses[j];
        (t < r.cols()).then(|| r.get(i, t))
    }

    /// Mean response per element over every recorded frame.
    pub fn mean_response(&self) -> Vec<f64> {
        let d = self.dim();
        let mut sum = vec![0.0; d];
        let mut n = 0usize;
        for r in &self.responses {
            for t in 0..r.cols() {
                for (i, s) in sum.iter_mut().enumerate() {
                    *s += r.get(i, t);
                }
                n += 1;
            }
        }
        sum.iter().map(|s| s / n.max(1) as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTrace {
    pub lengths: Vec<usize>,
    /// Gated layers only, in network order.
    pub layers: Vec<LayerTrace>,
}

impl AttentionTrace {
    pub fn layer(&self, index: usize) -> Option<&LayerTrace> {
        self.layers.iter().find(|l| l.layer == index)
    }

    /// Lowest gated layer.
    pub fn first(&self) -> &LayerTrace {
        &self.layers[0]
    }
}

/// Chunk size for extraction; keeps peak memory bounded on large sets.
const CHUNK: usize = 256;

/// Records every gated layer's responses in evaluation mode. Predictions
/// are unaffected (nothing is written back to the network).
pub fn extract_attention(net: &Network, batch: &SequenceBatch) -> Result<AttentionTrace> {
    if !net.has_gated_layer() {
        return Err(Error::NoGatedLayer);
    }
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let gated: Vec<usize> = (0..net.layers.len()).filter(|&l| net.layers[l].is_gated()).collect();
    let mut layers: Vec<LayerTrace> = gated
        .iter()
        .map(|&layer| LayerTrace {
            layer,
            responses: Vec::with_capacity(batch.len()),
            inputs: Vec::with_capacity(batch.len()),
        })
        .collect();
    let lengths = batch.lengths();
    let all: Vec<usize> = (0..batch.len()).collect();
    for chunk in all.chunks(CHUNK) {
        let sub = batch.subset(chunk);
        let pass = unroll_forward(net, &sub, Mode::Eval)?;
        for (trace, &l) in layers.iter_mut().zip(&gated) {
            let steps = &pass.layers[l].steps;
            for (j, &len) in sub.lengths().iter().enumerate() {
                let d = net.layers[l].input_dim;
                let mut a = Tensor2::zeros(d, len);
                let mut x = Tensor2::zeros(d, len);
                for (t, cache) in steps.iter().take(len).enumerate() {
                    let resp = cache.a.as_ref().expect("gated layer records responses");
                    for i in 0..d {
                        a.set(i, t, resp.get(i, j));
                        x.set(i, t, cache.x.get(i, j));
                    }
                }
                trace.responses.push(a);
                trace.inputs.push(x);
            }
        }
    }
    Ok(AttentionTrace { lengths, layers })
}

/// How "average energy" is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMode {
    /// Mean absolute value.
    #[default]
    MeanAbs,
    /// Root mean square.
    Rms,
}

/// What `ā_i` is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    /// Energy of `a_i x_i` over energy of `x_i`.
    #[default]
    EnergyRatio,
    /// Plain mean of `a_i`.
    MeanResponse,
}

impl FromStr for EnergyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abs" | "mean_abs" => Ok(EnergyMode::MeanAbs),
            "rms" => Ok(EnergyMode::Rms),
            other => Err(Error::InvalidConfig(format!("unknown energy mode `{other}`"))),
        }
    }
}

impl FromStr for Normalizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "energy_ratio" => Ok(Normalizer::EnergyRatio),
            "mean_response" => Ok(Normalizer::MeanResponse),
            other => Err(Error::InvalidConfig(format!("unknown normalizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RelativeOptions {
    pub energy: EnergyMode,
    pub normalizer: Normalizer,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointScore {
    pub joint: usize,
    /// Sum of the mean relative responses of the joint's X, Y and Z.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelativeAttention {
    pub layer: usize,
    pub options_energy: EnergyMode,
    pub options_normalizer: Normalizer,
    /// Static modulation factor per element; `None` where undefined.
    pub static_factor: Vec<Option<f64>>,
    /// Mean raw response per element.
    pub mean_response: Vec<f64>,
    /// Mean relative response per element over every frame.
    pub mean_relative: Vec<Option<f64>>,
    /// Elements whose factor is undefined (zero energy).
    pub excluded: Vec<usize>,
    /// Present when the input dimension is a multiple of 3.
    pub joints: Option<Vec<JointScore>>,
}

impl RelativeAttention {
    /// Mean of `mean_relative` over `elements`, skipping excluded ones.
    pub fn group_mean(&self, elements: &[usize]) -> Option<f64> {
        let vals: Vec<f64> = elements.iter().filter_map(|&i| self.mean_relative[i]).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("relative attention serializes")
    }
}

fn energy(sum_abs: f64, sum_sq: f64, n: usize, mode: EnergyMode) -> f64 {
    match mode {
        EnergyMode::MeanAbs => sum_abs / n as f64,
        EnergyMode::Rms => (sum_sq / n as f64).sqrt(),
    }
}

/// Relative attention of one gated layer over the traced dataset.
pub fn relative_attention(
    trace: &AttentionTrace,
    layer: usize,
    options: RelativeOptions,
) -> Result<RelativeAttention> {
    let lt = trace
        .layer(layer)
        .ok_or_else(|| Error::InvalidArgument(format!("layer {layer} is not gated or not traced")))?;
    let d = lt.dim();
    let (mut x_abs, mut x_sq) = (vec![0.0; d], vec![0.0; d]);
    let (mut ax_abs, mut ax_sq) = (vec![0.0; d], vec![0.0; d]);
    let mut n = 0usize;
    for (a, x) in lt.responses.iter().zip(&lt.inputs) {
        for t in 0..a.cols() {
            for i in 0..d {
                let (ai, xi) = (a.get(i, t), x.get(i, t));
                x_abs[i] += xi.abs();
                x_sq[i] += xi * xi;
                ax_abs[i] += (ai * xi).abs();
                ax_sq[i] += (ai * xi) * (ai * xi);
            }
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mean_response = lt.mean_response();
    let static_factor: Vec<Option<f64>> = (0..d)
        .map(|i| match options.normalizer {
            Normalizer::MeanResponse => (mean_response[i] > 0.0).then_some(mean_response[i]),
            Normalizer::EnergyRatio => {
                let before = energy(x_abs[i], x_sq[i], n, options.energy);
                let after = energy(ax_abs[i], ax_sq[i], n, options.energy);
                (before > 0.0 && after > 0.0).then(|| after / before)
            }
        })
        .collect();
    let mean_relative: Vec<Option<f64>> = (0..d)
        .map(|i| static_factor[i].map(|s| mean_response[i] / s))
        .collect();
    let excluded = (0..d).filter(|&i| static_factor[i].is_none()).collect();
    let joints = (d % 3 == 0).then(|| {
        (0..d / 3)
            .map(|j| JointScore {
                joint: j,
                score: (0..3)
                    .map(|c| mean_relative[3 * j + c])
                    .sum::<Option<f64>>(),
            })
            .collect()
    });
    Ok(RelativeAttention {
        layer,
        options_energy: options.energy,
        options_normalizer: options.normalizer,
        static_factor,
        mean_response,
        mean_relative,
        excluded,
        joints,
    })
}

/// One row per (sequence, step, element):
/// `sequence,step,element,input,response,relative`. The relative column is
/// empty for excluded elements.
pub fn attention_csv(trace: &AttentionTrace, rel: &RelativeAttention) -> Result<String> {
    let lt = trace
        .layer(rel.layer)
        .ok_or_else(|| Error::InvalidArgument(format!("layer {} not traced", rel.layer)))?;
    let mut out = String::from("sequence,step,element,input,response,relative\n");
    for (j, (a, x)) in lt.responses.iter().zip(&lt.inputs).enumerate() {
        for t in 0..a.cols() {
            for i in 0..a.rows() {
                let r = rel.static_factor[i].map(|s| a.get(i, t) / s);
                let _ = writeln!(
                    out,
                    "{j},{t},{i},{},{},{}",
                    x.get(i, t),
                    a.get(i, t),
                    r.map(|v| v.to_string()).unwrap_or_default()
                );
            }
        }
    }
    Ok(out)
}

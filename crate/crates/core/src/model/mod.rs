//! Stacked recurrent layers with a softmax classification head.

use std::fmt;
use std::str::FromStr;

use crate::bptt::{self, Mode};
use crate::config::KvConfig;
use crate::cells::{CellKind, CellParams, GateActivation};
use crate::data::SequenceBatch;
use crate::error::{Error, Result};
use crate::numerics::{softmax_cols, RngStream, Tensor2};

pub mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Readout {
    /// Top-layer hidden state at each sequence's last real frame.
    #[default]
    FinalStep,
    /// Mean of the top-layer hidden states over each sequence's real frames.
    MeanOverTime,
}

impl Readout {
    pub fn as_str(self) -> &'static str {
        match self {
            Readout::FinalStep => "final_step",
            Readout::MeanOverTime => "mean_over_time",
        }
    }
}

impl fmt::Display for Readout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Readout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "final_step" | "final" => Ok(Readout::FinalStep),
            "mean_over_time" | "mean" => Ok(Readout::MeanOverTime),
            other => Err(Error::InvalidConfig(format!("unknown readout `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: CellKind,
    pub hidden_dim: usize,
    pub gated: bool,
    pub gate_activation: GateActivation,
}

impl LayerSpec {
    pub fn new(kind: CellKind, hidden_dim: usize, gated: bool) -> Self {
        Self {
            kind,
            hidden_dim,
            gated,
            gate_activation: GateActivation::Sigmoid,
        }
    }

    pub fn gate(&self) -> Option<GateActivation> {
        self.gated.then_some(self.gate_activation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub num_classes: usize,
    pub layers: Vec<LayerSpec>,
    /// Inverted-dropout probability on every recurrent layer's output.
    pub dropout: f64,
    pub readout: Readout,
}

impl NetworkConfig {
    /// `num_layers` identical layers.
    pub fn stacked(
        input_dim: usize,
        num_classes: usize,
        num_layers: usize,
        layer: LayerSpec,
    ) -> Self {
        Self {
            input_dim,
            num_classes,
            layers: vec![layer; num_layers],
            dropout: 0.5,
            readout: Readout::FinalStep,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidConfig("network needs at least one layer".into()));
        }
        if self.input_dim == 0 {
            return Err(Error::InvalidConfig("input dimension must be positive".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidConfig("need at least two classes".into()));
        }
        if let Some(i) = self.layers.iter().position(|l| l.hidden_dim == 0) {
            return Err(Error::InvalidConfig(format!("layer {i} has zero width")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    /// Input dimension seen by layer `l`.
    pub fn layer_input_dim(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.layers[l - 1].hidden_dim
        }
    }

    pub fn top_hidden_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.hidden_dim)
    }

    pub fn set_gated(&mut self, gated: bool) {
        for l in &mut self.layers {
            l.gated = gated;
        }
    }

    pub fn set_gate_activation(&mut self, act: GateActivation) {
        for l in &mut self.layers {
            l.gate_activation = act;
        }
    }

    /// Fully resolved keys: one `layers.<i>.*` group per layer.
    pub fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        kv.set("input_dim", self.input_dim);
        kv.set("num_classes", self.num_classes);
        kv.set("dropout", self.dropout);
        kv.set("readout", self.readout);
        kv.set("num_layers", self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            kv.set(&format!("layers.{i}.kind"), l.kind);
            kv.set(&format!("layers.{i}.hidden"), l.hidden_dim);
            kv.set(&format!("layers.{i}.gated"), l.gated);
            kv.set(&format!("layers.{i}.gate_activation"), l.gate_activation);
        }
        kv
    }

    /// Inverse of [`to_kv`](Self::to_kv). Stack-wide `kind`, `hidden`,
    /// `gated` and `gate_activation` keys supply defaults for layers without
    /// their own entry. Missing keys fall back to three gated GRU layers of
    /// 100 units, dropout 0.5 and the final-step readout.
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let num_layers: usize = kv.get_or("num_layers", 3)?;
        let kind: CellKind = kv.get_or("kind", CellKind::Gru)?;
        let hidden: usize = kv.get_or("hidden", 100)?;
        let gated: bool = kv.get_or("gated", true)?;
        let act: GateActivation = kv.get_or("gate_activation", GateActivation::Sigmoid)?;
        let mut layers = Vec::with_capacity(num_layers);
        for i in 0..num_layers {
            layers.push(LayerSpec {
                kind: kv.get_or(&format!("layers.{i}.kind"), kind)?,
                hidden_dim: kv.get_or(&format!("layers.{i}.hidden"), hidden)?,
                gated: kv.get_or(&format!("layers.{i}.gated"), gated)?,
                gate_activation: kv.get_or(&format!("layers.{i}.gate_activation"), act)?,
            });
        }
        if let Some((k, _)) = kv.iter().find(|(k, _)| {
            k.strip_prefix("layers.")
                .and_then(|r| r.split('.').next())
                .and_then(|i| i.parse::<usize>().ok())
                .is_some_and(|i| i >= num_layers)
        }) {
            return Err(Error::InvalidConfig(format!(
                "`{k}` refers to a layer beyond num_layers={num_layers}"
            )));
        }
        let config = Self {
            input_dim: kv.require("input_dim")?,
            num_classes: kv.require("num_classes")?,
            layers,
            dropout: kv.get_or("dropout", 0.5)?,
            readout: kv.get_or("readout", Readout::FinalStep)?,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Recurrent stack plus a fully connected softmax classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    pub layers: Vec<CellParams>,
    /// `K x N_top`
    pub fc_w: Tensor2,
    /// `K x 1`
    pub fc_b: Tensor2,
}

impl Network {
    /// Random initialization, deterministic in `seed`.
    pub fn build(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = RngStream::derive(seed, "init", 0);
        let mut layers = Vec::with_capacity(config.layers.len());
        for (l, spec) in config.layers.iter().enumerate() {
            layers.push(CellParams::init(
                spec.kind,
                config.layer_input_dim(l),
                spec.hidden_dim,
                spec.gate(),
                &mut rng,
            )?);
        }
        let n = config.top_hidden_dim();
        let bound = 1.0 / (n as f64).sqrt();
        let fc_w = rng.uniform(-bound, bound, config.num_classes, n)?;
        let fc_b = Tensor2::zeros(config.num_classes, 1);
        Ok(Self {
            config,
            layers,
            fc_w,
            fc_b,
        })
    }

    /// All parameters zero.
    pub fn zeros(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let layers = config
            .layers
            .iter()
            .enumerate()
            .map(|(l, s)| CellParams::zeros(s.kind, config.layer_input_dim(l), s.hidden_dim, s.gate()))
            .collect();
        let fc_w = Tensor2::zeros(config.num_classes, config.top_hidden_dim());
        let fc_b = Tensor2::zeros(config.num_classes, 1);
        Ok(Self {
            config,
            layers,
            fc_w,
            fc_b,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config.clone(),
            layers: self.layers.iter().map(CellParams::zeros_like).collect(),
            fc_w: Tensor2::zeros(self.fc_w.rows(), self.fc_w.cols()),
            fc_b: Tensor2::zeros(self.fc_b.rows(), 1),
        }
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    /// Parameter tensors in canonical order, named `layers.<l>.<name>` and
    /// `fc.w` / `fc.b`.
    pub fn named_params(&self) -> Vec<(String, &Tensor2)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            for (name, t) in layer.named_tensors() {
                out.push((format!("layers.{l}.{name}"), t));
            }
        }
        out.push(("fc.w".into(), &self.fc_w));
        out.push(("fc.b".into(), &self.fc_b));
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor2> {
        let mut out: Vec<&mut Tensor2> = Vec::new();
        for layer in &mut self.layers {
            out.extend(layer.tensors_mut());
        }
        out.push(&mut self.fc_w);
        out.push(&mut self.fc_b);
        out
    }

    pub fn num_params(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn has_gated_layer(&self) -> bool {
        self.layers.iter().any(CellParams::is_gated)
    }

    /// Class probabilities (`K x B`) in evaluation mode.
    pub fn predict(&self, batch: &SequenceBatch) -> Result<Tensor2> {
        let pass = bptt::unroll_forward(self, batch, Mode::Eval)?;
        Ok(softmax_cols(&pass.logits))
    }

    /// Predicted class per sequence; ties go to the lowest index.
    pub fn predict_classes(&self, batch: &SequenceBatch) -> Result<Vec<usize>> {
        let probs = self.predict(batch)?;
        Ok((0..probs.cols()).map(|j| argmax(&probs.col(j))).collect())
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

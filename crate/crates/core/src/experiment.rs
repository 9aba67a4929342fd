//! Paired comparisons of network variants on the distractor task.
//!
//! For every seed, one dataset is generated and each variant is trained
//! from the same root seed, so the variants differ only in architecture.

use std::fmt;

use crate::analysis::{extract_attention, relative_attention, EnergyMode, Normalizer, RelativeOptions};
use crate::cells::{CellKind, GateActivation};
use crate::data::{gen_distractor, DistractorSpec};
use crate::error::Result;
use crate::model::{LayerSpec, NetworkConfig, Readout};
use crate::trainer::{evaluate, train, RunLog, TrainConfig, TrainOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    pub gated: bool,
    pub activation: GateActivation,
}

impl Variant {
    pub const BASELINE: Variant = Variant {
        gated: false,
        activation: GateActivation::Sigmoid,
    };
    pub const GATED: Variant = Variant {
        gated: true,
        activation: GateActivation::Sigmoid,
    };
    pub const SOFTMAX: Variant = Variant {
        gated: true,
        activation: GateActivation::Softmax,
    };
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.gated, self.activation) {
            (false, _) => f.write_str("baseline"),
            (true, GateActivation::Sigmoid) => f.write_str("gated"),
            (true, GateActivation::Softmax) => f.write_str("gated-softmax"),
        }
    }
}

/// Shared settings of a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub task: DistractorSpec,
    pub kind: CellKind,
    pub hidden: usize,
    pub layers: usize,
    /// Training settings; `network` and `seed` are replaced per run.
    pub train: TrainConfig,
}

impl Comparison {
    /// Two GRU layers of 16 on the 20-dimensional, 4-informative task.
    pub fn standard() -> Self {
        let task = DistractorSpec::default();
        let network = NetworkConfig::stacked(
            task.dims,
            task.classes,
            2,
            LayerSpec::new(CellKind::Gru, 16, true),
        );
        let mut train = TrainConfig::new(network);
        train.epochs = 30;
        train.batch_size = 32;
        train.lr = 0.005;
        Self {
            task,
            kind: CellKind::Gru,
            hidden: 16,
            layers: 2,
            train,
        }
    }

    pub fn network(&self, variant: Variant) -> NetworkConfig {
        let mut spec = LayerSpec::new(self.kind, self.hidden, variant.gated);
        spec.gate_activation = variant.activation;
        NetworkConfig {
            input_dim: self.task.dims,
            num_classes: self.task.classes,
            layers: vec![spec; self.layers],
            dropout: self.train.network.dropout,
            readout: Readout::FinalStep,
        }
    }

    pub fn train_config(&self, variant: Variant, seed: u64) -> TrainConfig {
        let mut cfg = self.train.clone();
        cfg.network = self.network(variant);
        cfg.seed = seed;
        cfg
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub variant: Variant,
    pub seed: u64,
    pub log: RunLog,
    /// Test metrics of the best-validation parameters.
    pub test_acc: f64,
    pub test_loss: f64,
    /// First-layer attention over the test set, gated variants only.
    pub attention: Option<AttentionSummary>,
}

/// Group means `(informative, distractor)` of first-layer attention scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionSummary {
    /// Relative attention with the default (mean-abs) energy ratio.
    pub relative: (f64, f64),
    /// Relative attention with the RMS energy ratio.
    pub relative_rms: (f64, f64),
    /// Raw mean gate response.
    pub raw: (f64, f64),
}

/// Trains one variant on the dataset of `seed`.
pub fn run(cmp: &Comparison, variant: Variant, seed: u64) -> Result<RunResult> {
    let spec = DistractorSpec {
        seed,
        ..cmp.task.clone()
    };
    let data = gen_distractor(&spec)?;
    let cfg = cmp.train_config(variant, seed);
    let out = train(&cfg, &data.train, &data.val, TrainOptions::default())?;
    let ev = evaluate(&out.best, &data.test)?;
    let attention = if variant.gated {
        let trace = extract_attention(&out.best, &data.test)?;
        let noise: Vec<usize> = (0..spec.dims).filter(|d| !data.informative.contains(d)).collect();
        let groups = |options: RelativeOptions| -> Result<Option<(f64, f64)>> {
            let rel = relative_attention(&trace, 0, options)?;
            Ok(rel.group_mean(&data.informative).zip(rel.group_mean(&noise)))
        };
        let relative = groups(RelativeOptions::default())?;
        let relative_rms = groups(RelativeOptions {
            energy: EnergyMode::Rms,
            ..Default::default()
        })?;
        let plain = relative_attention(
            &trace,
            0,
            RelativeOptions {
                normalizer: Normalizer::MeanResponse,
                ..Default::default()
            },
        )?;
        let avg = |dims: &[usize]| {
            let v: Vec<f64> = dims.iter().filter_map(|&i| plain.static_factor[i]).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        let raw = avg(&data.informative).zip(avg(&noise));
        match (relative, relative_rms, raw) {
            (Some(relative), Some(relative_rms), Some(raw)) => Some(AttentionSummary {
                relative,
                relative_rms,
                raw,
            }),
            _ => None,
        }
    } else {
        None
    };
    Ok(RunResult {
        variant,
        seed,
        log: out.log,
        test_acc: ev.accuracy,
        test_loss: ev.loss,
        attention,
    })
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Epochs the candidate needs to reach the baseline's final training loss,
/// as a fraction of the baseline's epoch count. `None` if it never does.
pub fn epochs_to_match(candidate: &RunLog, baseline: &RunLog) -> Option<f64> {
    let target = baseline.final_train_loss()?;
    let hit = candidate.first_epoch_reaching(target)?;
    Some(hit as f64 / baseline.rows.len() as f64)
}

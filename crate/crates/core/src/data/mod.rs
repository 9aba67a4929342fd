//! Sequence datasets: the batch container, the synthetic distractor
//! benchmark, skeleton preprocessing and the binary dataset format.

use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::numerics::{RngStream, Tensor2};

pub mod distractor;
pub mod io;
pub mod skeleton;

pub use distractor::{gen_distractor, DistractorSpec, DistractorSplits};
pub use io::{load_dataset, save_dataset, Dataset, DATASET_VERSION};
pub use skeleton::{center_first_frame, rotate_augment, BodyCenter, SkeletonSequence};

/// Labelled sequences sharing one input dimension. Each input is `D x T_i`
/// (one column per frame).
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch {
    dim: usize,
    num_classes: usize,
    inputs: Vec<Tensor2>,
    labels: Vec<usize>,
}

impl SequenceBatch {
    pub fn new(dim: usize, num_classes: usize, inputs: Vec<Tensor2>, labels: Vec<usize>) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} sequences but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        for x in &inputs {
            if x.rows() != dim {
                return Err(Error::InvalidArgument(format!(
                    "sequence has dimension {} (expected {dim})",
                    x.rows()
                )));
            }
            if x.cols() == 0 {
                return Err(Error::EmptySequence);
            }
        }
        Ok(Self {
            dim,
            num_classes,
            inputs,
            labels,
        })
    }

    pub fn empty(dim: usize, num_classes: usize) -> Self {
        Self {
            dim,
            num_classes,
            inputs: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Tensor2] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.inputs.iter().map(Tensor2::cols).collect()
    }

    pub fn max_len(&self) -> usize {
        self.inputs.iter().map(Tensor2::cols).max().unwrap_or(0)
    }

    pub fn subset(&self, indices: &[usize]) -> SequenceBatch {
        SequenceBatch {
            dim: self.dim,
            num_classes: self.num_classes,
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Same inputs with replaced labels.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<SequenceBatch> {
        SequenceBatch::new(self.dim, self.num_classes, self.inputs.clone(), labels)
    }

    pub fn map_inputs(&self, mut f: impl FnMut(&Tensor2) -> Tensor2) -> SequenceBatch {
        SequenceBatch {
            dim: self.dim,
            num_classes: self.num_classes,
            inputs: self.inputs.iter().map(&mut f).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Concatenation of two batches with identical dimensions.
    pub fn concat(&self, other: &SequenceBatch) -> Result<SequenceBatch> {
        if self.dim != other.dim || self.num_classes != other.num_classes {
            return Err(Error::InvalidArgument("cannot concatenate mismatched batches".into()));
        }
        let mut out = self.clone();
        out.inputs.extend(other.inputs.iter().cloned());
        out.labels.extend(&other.labels);
        Ok(out)
    }
}

/// Moves a seeded random `fraction` of `batch` into a second batch, e.g. to
/// hold out a validation set. At least one sequence stays in the first.
pub fn holdout_split(batch: &SequenceBatch, fraction: f64, seed: u64) -> (SequenceBatch, SequenceBatch) {
    let n = batch.len();
    let k = ((n as f64 * fraction).round() as usize).min(n.saturating_sub(1));
    let mut idx: Vec<usize> = (0..n).collect();
    RngStream::derive(seed, "holdout", 0).shuffle(&mut idx);
    let (held, kept) = idx.split_at(k);
    let mut kept = kept.to_vec();
    let mut held = held.to_vec();
    kept.sort_unstable();
    held.sort_unstable();
    (batch.subset(&kept), batch.subset(&held))
}

impl Dataset {
    pub fn from_distractor(spec: &DistractorSpec, splits: DistractorSplits) -> Self {
        let mut meta = KvConfig::new();
        meta.insert_section("gen", &spec.to_kv());
        let dims: Vec<String> = splits.informative.iter().map(usize::to_string).collect();
        meta.set("informative_dims", dims.join(","));
        Dataset {
            train: splits.train,
            val: splits.val,
            test: splits.test,
            meta,
        }
    }

    /// Informative dimensions recorded by the generator, if any.
    pub fn informative_dims(&self) -> Result<Option<Vec<usize>>> {
        match self.meta.get("informative_dims") {
            None => Ok(None),
            Some("") => Ok(Some(Vec::new())),
            Some(s) => s
                .split(',')
                .map(|v| {
                    v.parse()
                        .map_err(|_| Error::Format(format!("bad informative_dims `{s}`")))
                })
                .collect::<Result<Vec<usize>>>()
                .map(Some),
        }
    }
}

#[cfg(test)]
mod tests;

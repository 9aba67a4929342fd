//! Recurrent networks with element-wise attention gates.
//!
//! An element-wise attention gate attached to a recurrent block (sRNN, LSTM
//! or GRU) computes one response per input element from the current input
//! and the previous hidden state, and the block consumes the modulated input
//! `a ⊙ x` instead of `x`. This crate provides the cells, exact
//! backpropagation through time, the training recipe, synthetic benchmarks,
//! and cost/attention analysis.

// Index loops mirror the matrix formulas; `!(x > 0.0)` also rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bptt;
pub mod cells;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod model;
pub mod numerics;
pub mod optim;
pub mod trainer;

pub use analysis::{AttentionTrace, CostReport, RelativeAttention};
pub use bptt::{DropoutMasks, GradientSet};
pub use cells::{CellKind, CellParams, GateActivation, GateParams, StepState};
pub use config::KvConfig;
pub use data::{Dataset, DistractorSpec, SequenceBatch, SkeletonSequence};
pub use error::{Error, Result};
pub use model::checkpoint::Checkpoint;
pub use model::{LayerSpec, Network, NetworkConfig, Readout};
pub use numerics::{FlopTally, RngStream, Tensor2};
pub use optim::{AdamState, ClipMode, LrSchedule};
pub use trainer::{evaluate, train, Evaluation, RunLog, TrainConfig, TrainOptions};

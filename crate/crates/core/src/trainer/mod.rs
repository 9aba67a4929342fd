//! Mini-batch training with Adam, clipping, dropout and the plateau
//! schedule; evaluation; per-epoch logs and checkpoints.
//!
//! Every random draw of an epoch (shuffle order, dropout masks, rotations)
//! comes from a stream derived from the root seed and the epoch index, so a
//! run resumed from a checkpoint replays exactly what the uninterrupted run
//! would have done.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::bptt::{loss_and_grad, unroll_forward, cross_entropy, DropoutMasks, Mode};
use crate::config::KvConfig;
use crate::data::skeleton::{rotate_augment, SkeletonSequence};
use crate::data::{holdout_split, SequenceBatch};
use crate::error::{Error, Result};
use crate::model::checkpoint::{save_checkpoint, Checkpoint};
use crate::model::{argmax, Network, NetworkConfig};
use crate::numerics::RngStream;
use crate::optim::{adam_step, clip, AdamState, ClipMode, LrSchedule};

mod runlog;

pub use runlog::{EpochRecord, RunLog};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub network: NetworkConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Gradient clipping threshold.
    pub clip: f64,
    pub clip_mode: ClipMode,
    pub seed: u64,
    /// Random ±35° rotations each epoch; needs an input dimension divisible
    /// by 3.
    pub augment: bool,
    /// Validate every this many epochs (and always on the last one).
    pub eval_every: usize,
    /// Held-out share of the training set when no validation set is given.
    pub val_fraction: f64,
    pub lr_decay: f64,
    pub lr_patience: usize,
    pub lr_floor: f64,
    /// Stop once the rate is at its floor and training accuracy has not
    /// improved for this many epochs. `0` disables early stopping.
    pub early_stop: usize,
    /// Record elapsed seconds in the log. Off by default so logs of
    /// identical runs are byte-identical.
    pub record_wall_time: bool,
}

impl TrainConfig {
    pub fn new(network: NetworkConfig) -> Self {
        Self {
            network,
            epochs: 50,
            batch_size: 32,
            lr: 0.005,
            clip: 1.0,
            clip_mode: ClipMode::Elementwise,
            seed: 0,
            augment: false,
            eval_every: 1,
            val_fraction: 0.1,
            lr_decay: 10.0,
            lr_patience: 1,
            lr_floor: 1e-6,
            early_stop: 5,
            record_wall_time: false,
        }
    }

    pub fn schedule(&self) -> LrSchedule {
        let mut s = LrSchedule::new(self.lr);
        s.decay_factor = self.lr_decay;
        s.patience = self.lr_patience;
        s.floor = self.lr_floor;
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidConfig("eval_every must be positive".into()));
        }
        if !(self.clip > 0.0) {
            return Err(Error::InvalidConfig(format!("clip threshold {} must be positive", self.clip)));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::InvalidConfig("val_fraction must be in [0, 1)".into()));
        }
        if self.augment && !self.network.input_dim.is_multiple_of(3) {
            return Err(Error::InvalidConfig(format!(
                "rotation augmentation needs 3D joints; input dimension {} is not a multiple of 3",
                self.network.input_dim
            )));
        }
        self.schedule().validate()
    }

    /// `model.*` and `train.*` keys.
    pub fn to_kv(&self) -> KvConfig {
        let mut t = KvConfig::new();
        t.set("epochs", self.epochs);
        t.set("batch_size", self.batch_size);
        t.set("lr", self.lr);
        t.set("clip", self.clip);
        t.set("clip_mode", self.clip_mode);
        t.set("seed", self.seed);
        t.set("augment", self.augment);
        t.set("eval_every", self.eval_every);
        t.set("val_fraction", self.val_fraction);
        t.set("lr_decay", self.lr_decay);
        t.set("lr_patience", self.lr_patience);
        t.set("lr_floor", self.lr_floor);
        t.set("early_stop", self.early_stop);
        t.set("record_wall_time", self.record_wall_time);
        let mut kv = KvConfig::new();
        kv.insert_section("model", &self.network.to_kv());
        kv.insert_section("train", &t);
        kv
    }

    /// Reads `model.*` and `train.*`; missing `train.*` keys keep their
    /// defaults.
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let network = NetworkConfig::from_kv(&kv.section("model"))?;
        let t = kv.section("train");
        let d = Self::new(network);
        let known = [
            "epochs", "batch_size", "lr", "clip", "clip_mode", "seed", "augment", "eval_every",
            "val_fraction", "lr_decay", "lr_patience", "lr_floor", "early_stop", "record_wall_time",
        ];
        if let Some((k, _)) = t.iter().find(|(k, _)| !known.contains(k)) {
            return Err(Error::InvalidConfig(format!("unknown key `train.{k}`")));
        }
        let cfg = Self {
            epochs: t.get_or("epochs", d.epochs)?,
            batch_size: t.get_or("batch_size", d.batch_size)?,
            lr: t.get_or("lr", d.lr)?,
            clip: t.get_or("clip", d.clip)?,
            clip_mode: t.get_or("clip_mode", d.clip_mode)?,
            seed: t.get_or("seed", d.seed)?,
            augment: t.get_or("augment", d.augment)?,
            eval_every: t.get_or("eval_every", d.eval_every)?,
            val_fraction: t.get_or("val_fraction", d.val_fraction)?,
            lr_decay: t.get_or("lr_decay", d.lr_decay)?,
            lr_patience: t.get_or("lr_patience", d.lr_patience)?,
            lr_floor: t.get_or("lr_floor", d.lr_floor)?,
            early_stop: t.get_or("early_stop", d.early_stop)?,
            record_wall_time: t.get_or("record_wall_time", d.record_wall_time)?,
            network: d.network,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Accuracy and mean cross-entropy in evaluation mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
    pub count: usize,
}

const EVAL_CHUNK: usize = 256;

pub fn evaluate(net: &Network, batch: &SequenceBatch) -> Result<Evaluation> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (mut correct, mut loss_sum) = (0usize, 0.0);
    let all: Vec<usize> = (0..batch.len()).collect();
    for chunk in all.chunks(EVAL_CHUNK) {
        let sub = batch.subset(chunk);
        let pass = unroll_forward(net, &sub, Mode::Eval)?;
        let (loss, _) = cross_entropy(&pass.logits, sub.labels())?;
        loss_sum += loss * sub.len() as f64;
        correct += count_correct(&pass.logits, sub.labels());
    }
    Ok(Evaluation {
        accuracy: correct as f64 / batch.len() as f64,
        loss: loss_sum / batch.len() as f64,
        count: batch.len(),
    })
}

fn count_correct(logits: &crate::numerics::Tensor2, labels: &[usize]) -> usize {
    (0..logits.cols())
        .filter(|&j| argmax(&logits.col(j)) == labels[j])
        .count()
}

/// Everything needed to continue a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub network: Network,
    pub adam: AdamState,
    pub schedule: LrSchedule,
    /// Completed epochs.
    pub epoch: usize,
    pub best: Option<BestRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestRecord {
    pub epoch: usize,
    pub val_acc: f64,
    pub val_loss: f64,
}

impl BestRecord {
    fn beaten_by(&self, acc: f64, loss: f64) -> bool {
        acc > self.val_acc || (acc == self.val_acc && loss < self.val_loss)
    }
}

impl TrainState {
    pub fn fresh(config: &TrainConfig) -> Result<Self> {
        let network = Network::build(config.network.clone(), config.seed)?;
        let adam = AdamState::new(network.named_params().into_iter().map(|(_, t)| t));
        Ok(Self {
            network,
            adam,
            schedule: config.schedule(),
            epoch: 0,
            best: None,
        })
    }

    pub fn to_checkpoint(&self, seed: u64) -> Checkpoint {
        let mut ckpt = Checkpoint::new(self.network.clone(), seed);
        ckpt.optimizer = Some(self.adam.clone());
        let m = &mut ckpt.meta;
        m.set("epoch", self.epoch);
        let s = &self.schedule;
        m.set("schedule.lr", s.lr);
        m.set("schedule.decay_factor", s.decay_factor);
        m.set("schedule.patience", s.patience);
        m.set("schedule.floor", s.floor);
        m.set("schedule.best_acc", s.best_acc);
        m.set("schedule.bad_epochs", s.bad_epochs);
        m.set("schedule.stale_epochs", s.stale_epochs);
        if let Some(b) = &self.best {
            m.set("best.epoch", b.epoch);
            m.set("best.val_acc", b.val_acc);
            m.set("best.val_loss", b.val_loss);
        }
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let m = &ckpt.meta;
        let adam = ckpt
            .optimizer
            .clone()
            .ok_or_else(|| Error::Format("checkpoint carries no optimizer state".into()))?;
        let schedule = LrSchedule {
            lr: m.require("schedule.lr")?,
            decay_factor: m.require("schedule.decay_factor")?,
            patience: m.require("schedule.patience")?,
            floor: m.require("schedule.floor")?,
            best_acc: m.require("schedule.best_acc")?,
            bad_epochs: m.require("schedule.bad_epochs")?,
            stale_epochs: m.require("schedule.stale_epochs")?,
        };
        let best = match m.get_parsed::<usize>("best.epoch")? {
            None => None,
            Some(epoch) => Some(BestRecord {
                epoch,
                val_acc: m.require("best.val_acc")?,
                val_loss: m.require("best.val_loss")?,
            }),
        };
        Ok(Self {
            network: ckpt.network.clone(),
            adam,
            schedule,
            epoch: m.require("epoch")?,
            best,
        })
    }
}

/// Where and how a run persists its artifacts.
#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// When set, `runlog.csv`, `last.ckpt` and `best.ckpt` are written here
    /// after every epoch.
    pub out_dir: Option<PathBuf>,
    /// Continue from a saved state; its log rows are kept.
    pub resume: Option<(TrainState, RunLog)>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the final epoch.
    pub last: Network,
    /// Parameters with the best validation accuracy (the initial network
    /// when no epoch ran).
    pub best: Network,
    pub best_record: Option<BestRecord>,
    pub log: RunLog,
    pub state: TrainState,
    pub stopped_early: bool,
}

pub const RUNLOG_FILE: &str = "runlog.csv";
pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const BEST_CHECKPOINT: &str = "best.ckpt";

/// Splits off the validation set when `val` is empty.
pub fn resolve_validation(config: &TrainConfig, train: &SequenceBatch, val: &SequenceBatch) -> (SequenceBatch, SequenceBatch) {
    if val.is_empty() && config.val_fraction > 0.0 {
        holdout_split(train, config.val_fraction, config.seed)
    } else {
        (train.clone(), val.clone())
    }
}

/// Trains on `train`, validating on `val` (or a held-out share of `train`
/// when `val` is empty).
pub fn train(
    config: &TrainConfig,
    train: &SequenceBatch,
    val: &SequenceBatch,
    options: TrainOptions,
) -> Result<TrainOutcome> {
    train_with_progress(config, train, val, options, |_| {})
}

pub fn train_with_progress(
    config: &TrainConfig,
    train_set: &SequenceBatch,
    val_set: &SequenceBatch,
    options: TrainOptions,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for (name, b) in [("training", train_set), ("validation", val_set)] {
        if !b.is_empty()
            && (b.dim() != config.network.input_dim || b.num_classes() != config.network.num_classes)
        {
            return Err(Error::InvalidConfig(format!(
                "{name} data is {}-dimensional with {} classes; the model expects {} and {}",
                b.dim(),
                b.num_classes(),
                config.network.input_dim,
                config.network.num_classes
            )));
        }
    }
    let (train_set, val_set) = resolve_validation(config, train_set, val_set);

    let (mut state, mut log) = match options.resume {
        Some((state, mut log)) => {
            if state.network.config() != &config.network {
                return Err(Error::InvalidConfig(
                    "checkpoint network differs from the configured one".into(),
                ));
            }
            log.rows.truncate(state.epoch);
            (state, log)
        }
        None => (TrainState::fresh(config)?, RunLog::default()),
    };
    let mut best_net = match (&state.best, &options.out_dir) {
        (Some(_), Some(dir)) if dir.join(BEST_CHECKPOINT).exists() => {
            crate::model::checkpoint::load_checkpoint(&dir.join(BEST_CHECKPOINT))?.network
        }
        _ => state.network.clone(),
    };
    if let Some(dir) = &options.out_dir {
        std::fs::create_dir_all(dir)?;
    }

    let started = Instant::now();
    let mut stopped_early = false;
    while state.epoch < config.epochs {
        if config.early_stop > 0
            && state.schedule.at_floor()
            && state.schedule.stale_epochs >= config.early_stop
        {
            stopped_early = true;
            break;
        }
        let epoch = state.epoch;
        let lr = state.schedule.lr;
        let (train_loss, train_acc) = run_epoch(config, &train_set, &mut state, epoch)
            .map_err(|e| match e {
                Error::NonFiniteLoss { .. } | Error::NonFinite(_) => Error::Diverged { epoch: epoch + 1 },
                other => other,
            })?;
        state.epoch += 1;
        state.schedule.update(train_acc);

        let validate = !val_set.is_empty()
            && (state.epoch % config.eval_every == 0 || state.epoch == config.epochs);
        let val = if validate {
            Some(evaluate(&state.network, &val_set)?)
        } else {
            None
        };
        let mut improved = false;
        if let Some(v) = val {
            if state.best.is_none_or(|b| b.beaten_by(v.accuracy, v.loss)) {
                state.best = Some(BestRecord {
                    epoch: state.epoch,
                    val_acc: v.accuracy,
                    val_loss: v.loss,
                });
                best_net = state.network.clone();
                improved = true;
            }
        }
        let record = EpochRecord {
            epoch: state.epoch,
            train_loss,
            train_acc,
            val_loss: val.map(|v| v.loss),
            val_acc: val.map(|v| v.accuracy),
            lr,
            seconds: if config.record_wall_time {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        };
        progress(&record);
        log.rows.push(record);

        if let Some(dir) = &options.out_dir {
            persist(dir, config, &state, &log, improved)?;
        }
    }
    Ok(TrainOutcome {
        last: state.network.clone(),
        best: best_net,
        best_record: state.best,
        log,
        state,
        stopped_early,
    })
}

fn persist(dir: &Path, config: &TrainConfig, state: &TrainState, log: &RunLog, improved: bool) -> Result<()> {
    let ckpt = state.to_checkpoint(config.seed);
    if improved {
        save_checkpoint(&ckpt, &dir.join(BEST_CHECKPOINT))?;
    }
    save_checkpoint(&ckpt, &dir.join(LAST_CHECKPOINT))?;
    let tmp = dir.join("runlog.csv.tmp");
    std::fs::write(&tmp, log.to_csv())?;
    std::fs::rename(tmp, dir.join(RUNLOG_FILE))?;
    Ok(())
}

/// One shuffled pass; returns the mean training loss and accuracy as seen
/// with dropout active.
fn run_epoch(config: &TrainConfig, data: &SequenceBatch, state: &mut TrainState, epoch: usize) -> Result<(f64, f64)> {
    let e = epoch as u64;
    let mut order: Vec<usize> = (0..data.len()).collect();
    RngStream::derive(config.seed, "shuffle", e).shuffle(&mut order);
    let data = if config.augment {
        let mut rng = RngStream::derive(config.seed, "augment", e);
        let mut inputs = Vec::with_capacity(data.len());
        for x in data.inputs() {
            let seq = SkeletonSequence::new(x.clone())?;
            inputs.push(rotate_augment(&seq, &mut rng).into_frames());
        }
        SequenceBatch::new(data.dim(), data.num_classes(), inputs, data.labels().to_vec())?
    } else {
        data.clone()
    };

    let p = config.network.dropout;
    let mut drop_rng = RngStream::derive(config.seed, "dropout", e);
    let (mut loss_sum, mut correct) = (0.0, 0usize);
    for idx in order.chunks(config.batch_size) {
        let batch = data.subset(idx);
        let masks = (p > 0.0).then(|| DropoutMasks::sample(&state.network, batch.len(), p, &mut drop_rng));
        let (loss, grads, pass) = loss_and_grad(&state.network, &batch, masks.as_ref())?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { index: 0 });
        }
        let grads = clip(&grads, config.clip_mode, config.clip);
        let lr = state.schedule.lr;
        let mut params = state.network.params_mut();
        adam_step(&mut params, &grads.tensors, &mut state.adam, lr)?;
        loss_sum += loss * batch.len() as f64;
        correct += count_correct(&pass.logits, batch.labels());
    }
    let n = data.len() as f64;
    Ok((loss_sum / n, correct as f64 / n))
}

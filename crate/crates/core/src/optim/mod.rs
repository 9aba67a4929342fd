//! Adam, gradient clipping and the accuracy-plateau learning-rate schedule.

use std::fmt;
use std::str::FromStr;

use crate::bptt::GradientSet;
use crate::error::{Error, Result};
use crate::numerics::Tensor2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClipMode {
    /// Clamp every entry to `[-max, max]`.
    #[default]
    Elementwise,
    /// Rescale the whole set so its L2 norm is at most `max`.
    GlobalNorm,
}

impl ClipMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ClipMode::Elementwise => "elementwise",
            ClipMode::GlobalNorm => "global_norm",
        }
    }
}

impl fmt::Display for ClipMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClipMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elementwise" => Ok(ClipMode::Elementwise),
            "global_norm" => Ok(ClipMode::GlobalNorm),
            other => Err(Error::InvalidConfig(format!("unknown clip mode `{other}`"))),
        }
    }
}

/// Elementwise clamp of every gradient entry to `[-max_amp, max_amp]`.
pub fn clip_gradients(grads: &GradientSet, max_amp: f64) -> GradientSet {
    let mut out = grads.clone();
    for t in &mut out.tensors {
        t.map_inplace(|v| v.clamp(-max_amp, max_amp));
    }
    out
}

pub fn clip_global_norm(grads: &GradientSet, max_norm: f64) -> GradientSet {
    let norm = grads.global_norm();
    let mut out = grads.clone();
    if norm > max_norm {
        let s = max_norm / norm;
        for t in &mut out.tensors {
            t.map_inplace(|v| v * s);
        }
    }
    out
}

pub fn clip(grads: &GradientSet, mode: ClipMode, max: f64) -> GradientSet {
    match mode {
        ClipMode::Elementwise => clip_gradients(grads, max),
        ClipMode::GlobalNorm => clip_global_norm(grads, max),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Number of updates applied so far.
    pub step: u64,
    pub m: Vec<Tensor2>,
    pub v: Vec<Tensor2>,
}

impl AdamState {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    /// Zero moments shaped like `params`.
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor2>) -> Self {
        let m: Vec<Tensor2> = params
            .into_iter()
            .map(|t| Tensor2::zeros(t.rows(), t.cols()))
            .collect();
        Self {
            beta1: Self::BETA1,
            beta2: Self::BETA2,
            eps: Self::EPS,
            step: 0,
            v: m.clone(),
            m,
        }
    }
}

/// One bias-corrected Adam update. Nothing is modified if any gradient is
/// non-finite or shapes disagree.
pub fn adam_step(
    params: &mut [&mut Tensor2],
    grads: &[Tensor2],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || grads.len() != state.m.len() {
        return Err(Error::InvalidArgument(format!(
            "{} parameters, {} gradients, {} moment tensors",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        if p.shape() != g.shape() || g.shape() != m.shape() {
            return Err(Error::ShapeMismatch {
                op: "adam step",
                left: p.shape(),
                right: g.shape(),
            });
        }
        if !g.is_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
    }
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        let pd = p.data_mut();
        for (i, &gi) in g.data().iter().enumerate() {
            let mi = b1 * m.data()[i] + (1.0 - b1) * gi;
            let vi = b2 * v.data()[i] + (1.0 - b2) * gi * gi;
            m.data_mut()[i] = mi;
            v.data_mut()[i] = vi;
            pd[i] -= lr * (mi / c1) / ((vi / c2).sqrt() + state.eps);
        }
    }
    Ok(())
}

/// Divides the learning rate by `decay_factor` after `patience` epochs
/// without a new best training accuracy. A decay that would take the rate
/// below `floor` is not applied.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    pub lr: f64,
    pub decay_factor: f64,
    pub patience: usize,
    pub floor: f64,
    /// Best training accuracy seen; negative before the first epoch.
    pub best_acc: f64,
    /// Epochs without improvement since the last improvement or decay.
    pub bad_epochs: usize,
    /// Epochs without improvement, not reset by decays.
    pub stale_epochs: usize,
}

impl LrSchedule {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            decay_factor: 10.0,
            patience: 1,
            floor: 1e-6,
            best_acc: -1.0,
            bad_epochs: 0,
            stale_epochs: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate {} must be positive", self.lr)));
        }
        if !(self.decay_factor > 1.0) {
            return Err(Error::InvalidConfig("decay factor must exceed 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidConfig("patience must be at least 1".into()));
        }
        if !(self.floor > 0.0) {
            return Err(Error::InvalidConfig("learning-rate floor must be positive".into()));
        }
        Ok(())
    }

    /// True once another decay would cross the floor.
    pub fn at_floor(&self) -> bool {
        self.lr / self.decay_factor < self.floor * (1.0 - 1e-9)
    }

    /// Feeds one epoch's training accuracy; returns whether the rate decayed.
    pub fn update(&mut self, train_acc: f64) -> bool {
        if train_acc > self.best_acc {
            self.best_acc = train_acc;
            self.bad_epochs = 0;
            self.stale_epochs = 0;
            return false;
        }
        self.bad_epochs += 1;
        self.stale_epochs += 1;
        if self.bad_epochs >= self.patience && !self.at_floor() {
            self.lr /= self.decay_factor;
            self.bad_epochs = 0;
            return true;
        }
        false
    }
}

#[cfg(test)]
mod tests;

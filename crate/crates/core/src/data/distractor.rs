//! Synthetic sequence classification where only a few input dimensions
//! carry class information.
//!
//! Each class owns a template: for every informative dimension a sinusoid
//! with its own frequency and phase, plus a slow random walk. A sequence of
//! class `k` follows that template with a random phase jitter and additive
//! noise. The remaining dimensions are i.i.d. Gaussian noise with standard
//! deviation `noise * distractor_scale`.

use crate::config::KvConfig;
use crate::data::SequenceBatch;
use crate::error::{Error, Result};
use crate::numerics::{RngStream, Tensor2};

#[derive(Debug, Clone, PartialEq)]
pub struct DistractorSpec {
    pub dims: usize,
    pub informative: usize,
    pub classes: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Standard deviation of the additive noise on informative dimensions.
    pub noise: f64,
    /// Distractor standard deviation, relative to `noise`.
    pub distractor_scale: f64,
    /// Peak amplitude of the class sinusoids.
    pub amplitude: f64,
    /// Per-sequence phase jitter, in radians (uniform in `±jitter`).
    pub jitter: f64,
    /// Step size of the per-class random walk component.
    pub walk: f64,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for DistractorSpec {
    fn default() -> Self {
        Self {
            dims: 20,
            informative: 4,
            classes: 3,
            min_len: 10,
            max_len: 20,
            noise: 1.0,
            distractor_scale: 4.0,
            amplitude: 1.0,
            jitter: 0.6,
            walk: 0.15,
            train: 450,
            val: 50,
            test: 300,
            seed: 0,
        }
    }
}

impl DistractorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.informative == 0 || self.informative >= self.dims {
            return bad(format!(
                "informative dimensions ({}) must be in 1..{} (dims)",
                self.informative, self.dims
            ));
        }
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return bad(format!("bad length range {}..={}", self.min_len, self.max_len));
        }
        for (name, v) in [
            ("noise", self.noise),
            ("distractor_scale", self.distractor_scale),
            ("amplitude", self.amplitude),
            ("jitter", self.jitter),
            ("walk", self.walk),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if self.train == 0 {
            return bad("training split is empty".into());
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        kv.set("dims", self.dims);
        kv.set("informative", self.informative);
        kv.set("classes", self.classes);
        kv.set("min_len", self.min_len);
        kv.set("max_len", self.max_len);
        kv.set("noise", self.noise);
        kv.set("distractor_scale", self.distractor_scale);
        kv.set("amplitude", self.amplitude);
        kv.set("jitter", self.jitter);
        kv.set("walk", self.walk);
        kv.set("train", self.train);
        kv.set("val", self.val);
        kv.set("test", self.test);
        kv.set("seed", self.seed);
        kv
    }

    /// Missing keys fall back to [`Default`].
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let d = Self::default();
        let spec = Self {
            dims: kv.get_or("dims", d.dims)?,
            informative: kv.get_or("informative", d.informative)?,
            classes: kv.get_or("classes", d.classes)?,
            min_len: kv.get_or("min_len", d.min_len)?,
            max_len: kv.get_or("max_len", d.max_len)?,
            noise: kv.get_or("noise", d.noise)?,
            distractor_scale: kv.get_or("distractor_scale", d.distractor_scale)?,
            amplitude: kv.get_or("amplitude", d.amplitude)?,
            jitter: kv.get_or("jitter", d.jitter)?,
            walk: kv.get_or("walk", d.walk)?,
            train: kv.get_or("train", d.train)?,
            val: kv.get_or("val", d.val)?,
            test: kv.get_or("test", d.test)?,
            seed: kv.get_or("seed", d.seed)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistractorSplits {
    pub train: SequenceBatch,
    pub val: SequenceBatch,
    pub test: SequenceBatch,
    /// Sorted indices of the class-carrying dimensions.
    pub informative: Vec<usize>,
}

struct ClassTemplate {
    freq: Vec<f64>,
    phase: Vec<f64>,
    /// `informative x max_len` random walk, zero at t = 0.
    walk: Tensor2,
}

fn f32_round(v: f64) -> f64 {
    f64::from(v as f32)
}

/// Generates the three splits. Every value is rounded to `f32`, so the
/// splits survive a save/load round trip bit for bit.
pub fn gen_distractor(spec: &DistractorSpec) -> Result<DistractorSplits> {
    spec.validate()?;
    let (d, s) = (spec.dims, spec.informative);

    let mut pick = RngStream::derive(spec.seed, "distractor-dims", 0);
    let mut order: Vec<usize> = (0..d).collect();
    pick.shuffle(&mut order);
    let mut informative = order[..s].to_vec();
    informative.sort_unstable();

    let mut trng = RngStream::derive(spec.seed, "distractor-templates", 0);
    let templates: Vec<ClassTemplate> = (0..spec.classes)
        .map(|_| {
            let freq = (0..s).map(|_| trng.uniform_scalar(0.15, 0.9)).collect();
            let phase = (0..s)
                .map(|_| trng.uniform_scalar(0.0, std::f64::consts::TAU))
                .collect();
            let mut walk = Tensor2::zeros(s, spec.max_len);
            for i in 0..s {
                for t in 1..spec.max_len {
                    let v = walk.get(i, t - 1) + spec.walk * trng.normal();
                    walk.set(i, t, v);
                }
            }
            ClassTemplate { freq, phase, walk }
        })
        .collect();

    let sample = |split: &str, count: usize| -> Result<SequenceBatch> {
        let mut rng = RngStream::derive(spec.seed, &format!("distractor-{split}"), 0);
        let mut inputs = Vec::with_capacity(count);
        let mut labels: Vec<usize> = (0..count).map(|j| j % spec.classes).collect();
        rng.shuffle(&mut labels);
        for &k in &labels {
            let len = spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
            let tpl = &templates[k];
            let delta = rng.uniform_scalar(-spec.jitter, spec.jitter);
            let mut x = Tensor2::zeros(d, len);
            for t in 0..len {
                for (c, &row) in informative.iter().enumerate() {
                    let clean = spec.amplitude * (tpl.freq[c] * t as f64 + tpl.phase[c] + delta).sin()
                        + tpl.walk.get(c, t);
                    x.set(row, t, f32_round(clean + spec.noise * rng.normal()));
                }
            }
            let sd = spec.noise * spec.distractor_scale;
            for t in 0..len {
                for &row in &order[s..] {
                    x.set(row, t, f32_round(sd * rng.normal()));
                }
            }
            inputs.push(x);
        }
        SequenceBatch::new(d, spec.classes, inputs, labels)
    };

    Ok(DistractorSplits {
        train: sample("train", spec.train)?,
        val: sample("val", spec.val)?,
        test: sample("test", spec.test)?,
        informative,
    })
}

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Tensor2;
use crate::error::{Error, Result};

/// Seeded, platform-independent random stream (ChaCha8).
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent child stream keyed by a label and an index, e.g.
    /// `derive(seed, "shuffle", epoch)`.
    pub fn derive(seed: u64, label: &str, index: u64) -> Self {
        let mut h = splitmix64(seed);
        for b in label.bytes() {
            h = splitmix64(h ^ u64::from(b));
        }
        Self::new(splitmix64(h ^ index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw in `[lo, hi)`; returns `lo` exactly when `lo == hi`.
    pub fn uniform_scalar(&mut self, lo: f64, hi: f64) -> f64 {
        let u: f64 = self.rng.random();
        lo + (hi - lo) * u
    }

    pub fn uniform(&mut self, lo: f64, hi: f64, rows: usize, cols: usize) -> Result<Tensor2> {
        if !(lo <= hi) {
            return Err(Error::InvalidArgument(format!(
                "uniform bounds out of order: lo={lo} hi={hi}"
            )));
        }
        let data = (0..rows * cols).map(|_| self.uniform_scalar(lo, hi)).collect();
        Tensor2::from_vec(rows, cols, data)
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform_scalar(0.0, 1.0) < p
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

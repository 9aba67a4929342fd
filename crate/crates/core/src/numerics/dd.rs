//! Double-double arithmetic: an unevaluated sum `hi + lo` of two `f64`s,
//! roughly 106 bits of significand. Only what the finite-difference oracle
//! needs is provided.

use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

const LN2: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

/// Taylor terms used after range reduction; `|r| < 2^-11` leaves the
/// truncation far below `2^-106`.
const EXP_TERMS: usize = 14;
const EXP_SQUARINGS: i32 = 10;

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };
    pub const ONE: Self = Self { hi: 1.0, lo: 0.0 };

    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = two_sum(hi, lo);
        Self { hi, lo }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    fn mul_pow2(self, k: i32) -> Self {
        let s = 2f64.powi(k);
        Self {
            hi: self.hi * s,
            lo: self.lo * s,
        }
    }

    /// `exp(x) - 1`, accurate for small `x`.
    pub fn exp_m1(self) -> Self {
        if self.hi.abs() < 0.5 * LN2.hi {
            reduced_exp_m1(self)
        } else {
            self.exp() - Self::ONE
        }
    }

    pub fn exp(self) -> Self {
        if self.hi > 709.0 {
            return Self::from(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Self::ZERO;
        }
        let k = (self.hi / LN2.hi).round();
        let r = self - LN2 * Self::from(k);
        (reduced_exp_m1(r) + Self::ONE).mul_pow2(k as i32)
    }

    pub fn tanh(self) -> Self {
        if self.hi.abs() > 40.0 {
            return Self::from(self.hi.signum());
        }
        // tanh(x) = expm1(2x) / (expm1(2x) + 2), no cancellation near 0.
        let e = (self + self).exp_m1();
        e / (e + Self::from(2.0))
    }

    pub fn sigmoid(self) -> Self {
        if self.hi >= 0.0 {
            Self::ONE / (Self::ONE + (-self).exp())
        } else {
            let e = self.exp();
            e / (Self::ONE + e)
        }
    }
}

/// `exp(r) - 1` for `|r| ≤ ln2/2` by scaling, a Taylor series and repeated
/// doubling `p ← 2p + p²`.
fn reduced_exp_m1(r: DoubleDouble) -> DoubleDouble {
    let s = r.mul_pow2(-EXP_SQUARINGS);
    let mut term = s;
    let mut p = s;
    for n in 2..=EXP_TERMS {
        term = term * s / DoubleDouble::from(n as f64);
        p = p + term;
    }
    for _ in 0..EXP_SQUARINGS {
        p = p + p + p * p;
    }
    p
}

impl From<f64> for DoubleDouble {
    fn from(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Self { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        // Long division: two correction steps.
        let q1 = self.hi / o.hi;
        let r = self - o * Self::from(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Self::from(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo } + Self::from(q3)
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&o.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&o.lo),
            ord => Some(ord),
        }
    }
}

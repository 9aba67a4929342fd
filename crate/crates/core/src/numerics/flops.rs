//! Runtime multiply/add counter.
//!
//! Every arithmetic primitive on [`Tensor2`](super::Tensor2) reports its
//! multiplications and additions here. Counting is off unless a
//! [`measure`] scope is active on the current thread. Activations are not
//! counted.

use std::cell::Cell;

use serde::Serialize;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FlopTally {
    pub mults: u64,
    pub adds: u64,
}

impl FlopTally {
    pub fn total(&self) -> u64 {
        self.mults + self.adds
    }
}

thread_local! {
    static ACTIVE: Cell<bool> = const { Cell::new(false) };
    static MULTS: Cell<u64> = const { Cell::new(0) };
    static ADDS: Cell<u64> = const { Cell::new(0) };
}

#[inline]
pub(crate) fn record(mults: usize, adds: usize) {
    ACTIVE.with(|active| {
        if active.get() {
            MULTS.with(|m| m.set(m.get() + mults as u64));
            ADDS.with(|a| a.set(a.get() + adds as u64));
        }
    });
}

/// Runs `f` and returns its result together with the arithmetic it performed.
/// Nested scopes are not supported; the inner scope resets the tally.
pub fn measure<R>(f: impl FnOnce() -> R) -> (R, FlopTally) {
    MULTS.with(|m| m.set(0));
    ADDS.with(|a| a.set(0));
    ACTIVE.with(|a| a.set(true));
    let out = f();
    ACTIVE.with(|a| a.set(false));
    let tally = FlopTally {
        mults: MULTS.with(Cell::get),
        adds: ADDS.with(Cell::get),
    };
    (out, tally)
}

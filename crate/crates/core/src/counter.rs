//! Per-thread instrumentation of scalar multiplications and protocol hash
//! evaluations.
//!
//! Counting is off unless a [`CountingScope`] is alive on the current thread.
//! Group backends report every `scalar_mult`, `hash_to_group` and
//! `hash_to_scalar`; the nonce binding and PPID hashes report through
//! [`record_hash_eval`]. Signature-internal digests are not counted.

use std::cell::Cell;
use std::marker::PhantomData;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub scalar_mults: u64,
    pub hash_evals: u64,
}

thread_local! {
    static COUNTS: Cell<Option<OpCounts>> = const { Cell::new(None) };
}

/// Active counting window on the current thread. Counts start at zero and
/// stop being recorded when the scope is dropped. Scopes do not nest: a new
/// scope resets the counters of an enclosing one.
#[derive(Debug)]
pub struct CountingScope {
    _thread_bound: PhantomData<*const ()>,
}

impl CountingScope {
    pub fn start() -> Self {
        COUNTS.with(|c| c.set(Some(OpCounts::default())));
        Self {
            _thread_bound: PhantomData,
        }
    }

    pub fn counts(&self) -> OpCounts {
        COUNTS.with(|c| c.get()).unwrap_or_default()
    }
}

impl Drop for CountingScope {
    fn drop(&mut self) {
        COUNTS.with(|c| c.set(None));
    }
}

fn bump(f: impl FnOnce(&mut OpCounts)) {
    COUNTS.with(|c| {
        if let Some(mut counts) = c.get() {
            f(&mut counts);
            c.set(Some(counts));
        }
    });
}

pub fn record_scalar_mult() {
    bump(|c| c.scalar_mults += 1);
}

pub fn record_hash_eval() {
    bump(|c| c.hash_evals += 1);
}

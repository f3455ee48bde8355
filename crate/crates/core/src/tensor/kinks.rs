//! Fingerprints of the branch decisions taken by non-smooth ops.
//!
//! Ops with a kink (ReLU, max, clamps, absolute values) report which side
//! of the kink every element fell on. Two evaluations with the same
//! fingerprint lie in the same smooth piece of the function.

use std::cell::Cell;

thread_local! {
    static TRACE: Cell<Option<u64>> = const { Cell::new(None) };
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Runs `f` and returns the fingerprint of every branch decision it made
/// on this thread.
pub fn trace_branches<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let outer = TRACE.with(|t| t.replace(Some(FNV_OFFSET)));
    let out = f();
    let inner = TRACE.with(|t| t.replace(outer));
    (out, inner.unwrap_or(FNV_OFFSET))
}

pub(crate) fn active() -> bool {
    TRACE.with(|t| t.get().is_some())
}

/// Folds branch identifiers into the current fingerprint, if tracing.
pub(crate) fn record(decisions: impl Iterator<Item = u64>) {
    TRACE.with(|t| {
        if let Some(mut h) = t.get() {
            for d in decisions {
                h = (h ^ d).wrapping_mul(FNV_PRIME);
            }
            t.set(Some(h));
        }
    });
}

/// Records the side of zero (or of `at`) each value falls on.
pub(crate) fn record_sides<T: PartialOrd + Copy>(values: &[T], at: T) {
    if active() {
        record(values.iter().map(|&v| {
            if v > at {
                2
            } else if v < at {
                1
            } else {
                0
            }
        }));
    }
}

//! Execution-driven operation tally, live only in unit-test builds.

#[cfg(test)]
use std::cell::Cell;

#[cfg(test)]
thread_local! {
    static OPS: Cell<u64> = const { Cell::new(0) };
}

#[inline(always)]
pub(crate) fn tally(_n: u64) {
    #[cfg(test)]
    OPS.with(|c| c.set(c.get() + _n));
}

/// Return the ops tallied on this thread since the last call and reset.
#[cfg(test)]
pub(crate) fn take() -> u64 {
    OPS.with(|c| c.replace(0))
}

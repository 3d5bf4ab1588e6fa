//! Process-wide switch for point-parallel kernels.
//!
//! Only pointwise maps run in parallel; every reduction stays sequential so
//! results are bit-identical whatever the thread count.

use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;

static PARALLEL: AtomicBool = AtomicBool::new(false);

/// Enable or disable point-parallel kernels. The caller owns the rayon pool size.
pub fn set_parallel(enabled: bool) {
    PARALLEL.store(enabled, Ordering::Relaxed);
}

pub fn parallel() -> bool {
    PARALLEL.load(Ordering::Relaxed)
}

/// `(0..len).map(f).collect()`, point-parallel when enabled.
pub fn map_points<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if parallel() {
        (0..len).into_par_iter().map(f).collect()
    } else {
        (0..len).map(f).collect()
    }
}

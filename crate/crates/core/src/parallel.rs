//! Execution seam between the rayon pool and the sequential fallback.
//!
//! Work is always expressed as an index-addressed map whose results are
//! collected in index order, and every worker derives its randomness from the
//! index — so both execution modes produce bitwise-identical output. The
//! `parallel` feature (default) compiles the rayon path in; `force_sequential`
//! switches it off at runtime, which is how the bench suite and the
//! equivalence tests compare both paths inside one binary.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Disable (`true`) or re-enable (`false`) the rayon path at runtime.
/// No-op when the crate is built without the `parallel` feature.
pub fn force_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::SeqCst);
}

/// True when work will run on the current thread only.
pub fn is_sequential() -> bool {
    cfg!(not(feature = "parallel")) || FORCE_SEQUENTIAL.load(Ordering::SeqCst)
}

/// Cap the worker pool at `n` threads (0 keeps the library default). Must be
/// called before any parallel work; later calls cannot resize the pool.
/// Without the `parallel` feature execution is sequential regardless.
pub fn configure_threads(n: usize) -> crate::error::Result<()> {
    #[cfg(feature = "parallel")]
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| crate::error::Error::Config(format!("thread pool setup: {e}")))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

/// Map `f` over `0..n`, collecting results in index order.
pub(crate) fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if !is_sequential() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

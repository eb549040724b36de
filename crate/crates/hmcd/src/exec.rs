//! Execution policy for the data-parallel hot loops.
//!
//! The solver runs independent seeded restarts and the benchmark generator
//! samples independent rows; both go through the helper here so the same
//! code runs on a rayon pool or on the current thread. Work items never share
//! mutable state and results are collected in index order, so the two modes
//! produce bit-identical results.

/// Chooses between the rayon pool and plain sequential iteration.
///
/// `Parallel` requires the `parallel` feature; without it the variant still
/// exists but runs sequentially, which keeps callers feature-agnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Maps `f` over `0..len` and collects results in index order.
pub(crate) fn map_indexed<R, F>(mode: Execution, len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match mode {
        Execution::Sequential => (0..len).map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..len).into_par_iter().map(f).collect()
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel => (0..len).map(f).collect(),
    }
}

//! Execution-mode plumbing for the data-parallel batch loops.
//!
//! With the `parallel` feature the batch loops run on the rayon global pool;
//! without it they run sequentially. Work items are independent and results
//! are collected in index order, so both paths produce identical output.

/// How batch loops (rows/columns of a splitting step, images of an
/// experiment, samples of an evaluation) are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    /// Rayon work-stealing pool. Falls back to sequential execution when the
    /// crate is built without the `parallel` feature.
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

/// Cap the rayon global pool at `n` threads. Must be called before any
/// parallel work is submitted; later calls are ignored by rayon. A no-op
/// without the `parallel` feature.
pub fn set_threads(n: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}

/// Apply `f` to `0..n` and collect results in index order.
pub(crate) fn try_map_indexed<T, E, F>(n: usize, mode: ExecMode, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    match mode {
        ExecMode::Sequential => (0..n).map(f).collect(),
        ExecMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            (0..n).map(f).collect()
        }
    }
}

//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by field operations, solvers, I/O and the benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("index ({i}, {j}) out of range for {nx}x{ny} grid")]
    IndexOutOfRange {
        i: usize,
        j: usize,
        nx: usize,
        ny: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// The inner Newton iteration did not reach the residual tolerance,
    /// even after the time-step halving retries.
    #[error("nonlinear solve failed: residual {residual:.3e} after {iters} iterations")]
    NonlinearSolveFailure { residual: f64, iters: usize },

    #[error("bad IDX magic: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },

    #[error("truncated data: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },

    #[error("image/label count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Image inpainting with a modified Cahn-Hilliard equation, plus the pieces
//! needed to measure what the filter buys a classifier on damaged images:
//!
//! - [`field`]: phase-field grids, double-well potential, discrete operators;
//! - [`solver`]: semi-implicit upwind finite-volume steppers (full 2D and
//!   dimensional splitting) with an inner Newton iteration;
//! - [`inpaint`]: the two-stage inpainting pipeline (large-epsilon
//!   reconnection, then small-epsilon sharpening);
//! - [`damage`]: stripe and random damage generators with exact masks;
//! - [`mnist`]: IDX-format dataset ingestion;
//! - [`classifier`]: a dense 784-64-64-10 network trained from scratch;
//! - [`experiment`]: the benchmark harness comparing classification accuracy
//!   with and without the filter.

pub mod classifier;
pub mod damage;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod field;
pub mod inpaint;
pub mod mnist;
pub mod pgm;
pub mod solver;

pub use error::{Error, Result};
pub use exec::ExecMode;
pub use field::{potential, potential_split_derivatives, InpaintMask, PhaseField, SolverParams};
pub use solver::{run_to_steady, step_full_2d, step_splitting, Scheme, StepResult};

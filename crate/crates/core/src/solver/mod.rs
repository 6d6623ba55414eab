//! Implicit upwind finite-volume steppers for the modified Cahn-Hilliard
//! equation
//!
//! ```text
//! d phi / dt = -div u + lambda(x) (phi0 - phi),    u = -grad xi,
//! xi = H'(phi) - eps^2 lap phi,
//! ```
//!
//! with no-flux walls. One time step solves the nonlinear system
//!
//! ```text
//! (phi' - phi) / dt = -(F_{i+1/2} - F_{i-1/2}) / dx
//!                     -(G_{j+1/2} - G_{j-1/2}) / dy
//!                     + lambda_{ij} (phi0 - phi'),
//! ```
//!
//! where the interface fluxes come from the upwind-split velocities of the
//! semi-implicit variation `xi' = Hc'(phi') - He'(phi)
//! - (eps^2/2)(lap phi + lap phi')`. Convex part implicit, expansive part
//! explicit, Laplacian averaged: this is the convex-splitting combination
//! whose discrete free energy decays unconditionally in the time step.
//!
//! Two steppers share that structure: [`step_full_2d`] solves the whole grid
//! as one banded Newton problem; [`step_splitting`] sweeps rows then columns,
//! each line a small 1D implicit problem, non-adjacent lines solved
//! independently (odd/even batches), which is what the `parallel` feature
//! exploits.

mod banded;
mod full2d;
mod line;
mod newton;

use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::field::{InpaintMask, PhaseField, SolverParams};

/// Which time stepper advances the field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Scheme {
    /// Whole-grid implicit solve per step.
    Full2d,
    /// Dimensional splitting: row sweep, then column sweep.
    Splitting,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full2d" => Ok(Scheme::Full2d),
            "splitting" => Ok(Scheme::Splitting),
            other => Err(Error::InvalidParam(format!(
                "unknown scheme '{other}' (expected full2d or splitting)"
            ))),
        }
    }
}

/// Outcome of a single accepted time step.
#[derive(Debug, Clone)]
pub struct StepResult {
    /// State at the end of the step.
    pub field: PhaseField,
    /// Newton iterations spent (summed over line subproblems for the
    /// splitting scheme).
    pub newton_iters: usize,
    /// Largest final L-infinity residual among the nonlinear solves.
    pub residual: f64,
    /// Discrete free energy of the new state.
    pub energy: f64,
}

/// Per-step record passed to the optional trace sink of
/// [`run_to_steady_with`].
#[derive(Debug, Clone, Copy)]
pub struct StepTrace {
    pub step: usize,
    pub l1_delta: f64,
    pub energy: f64,
    pub newton_iters: usize,
}

/// Interface fluxes of one step: `f` holds the x-direction flux
/// `F_{i+1/2,j}` on the `(nx+1) x ny` interface grid, `g` the y-direction
/// flux `G_{i,j+1/2}` on `nx x (ny+1)`. Wall entries are exactly zero.
#[derive(Debug, Clone)]
pub struct FluxSet {
    nx: usize,
    ny: usize,
    f: Vec<f64>,
    g: Vec<f64>,
}

impl FluxSet {
    /// x-flux across the interface between cells `(ih-1, j)` and `(ih, j)`;
    /// `ih = 0` and `ih = nx` are the walls.
    pub fn f(&self, ih: usize, j: usize) -> f64 {
        assert!(ih <= self.nx && j < self.ny);
        self.f[j * (self.nx + 1) + ih]
    }

    /// y-flux across the interface between cells `(i, jh-1)` and `(i, jh)`.
    pub fn g(&self, i: usize, jh: usize) -> f64 {
        assert!(i < self.nx && jh <= self.ny);
        self.g[jh * self.nx + i]
    }

    /// Flux divergence at cell `(i, j)`.
    pub fn divergence(&self, i: usize, j: usize, dx: f64, dy: f64) -> f64 {
        (self.f(i + 1, j) - self.f(i, j)) / dx + (self.g(i, j + 1) - self.g(i, j)) / dy
    }
}

/// Upwind split of an interface velocity: `v^+ + v^-`. With unit mobility
/// the two parts recombine to `v` identically; the split is kept because it
/// is the form the flux takes.
#[inline]
pub(crate) fn upwind(v: f64) -> f64 {
    v.max(0.0) + v.min(0.0)
}

/// Fill interface fluxes from a variation field `xi`: interior velocities
/// `v = -(xi_right - xi_left) / h`, upwind split, walls forced to zero.
pub(crate) fn fill_fluxes(
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    xi: &[f64],
    f: &mut [f64],
    g: &mut [f64],
) {
    debug_assert_eq!(xi.len(), nx * ny);
    debug_assert_eq!(f.len(), (nx + 1) * ny);
    debug_assert_eq!(g.len(), nx * (ny + 1));
    for j in 0..ny {
        f[j * (nx + 1)] = 0.0;
        f[j * (nx + 1) + nx] = 0.0;
        for ih in 1..nx {
            let v = -(xi[j * nx + ih] - xi[j * nx + ih - 1]) / dx;
            f[j * (nx + 1) + ih] = upwind(v);
        }
    }
    for i in 0..nx {
        g[i] = 0.0;
        g[ny * nx + i] = 0.0;
    }
    for jh in 1..ny {
        for i in 0..nx {
            let w = -(xi[jh * nx + i] - xi[(jh - 1) * nx + i]) / dy;
            g[jh * nx + i] = upwind(w);
        }
    }
}

/// Upwind interface fluxes of a variation field.
pub fn upwind_fluxes(xi: &PhaseField) -> FluxSet {
    let (nx, ny) = (xi.nx(), xi.ny());
    let mut f = vec![0.0; (nx + 1) * ny];
    let mut g = vec![0.0; nx * (ny + 1)];
    fill_fluxes(nx, ny, xi.dx(), xi.dy(), xi.values(), &mut f, &mut g);
    FluxSet { nx, ny, f, g }
}

/// Semi-implicit variation of the free energy,
/// `xi = (phi_new)^3 - phi_old - (eps^2/2)(lap phi_old + lap phi_new)`,
/// with the ghost-cell Laplacian.
pub fn variation_semi_implicit(
    phi_new: &PhaseField,
    phi_old: &PhaseField,
    epsilon: f64,
) -> Result<PhaseField> {
    if !phi_new.same_shape(phi_old) {
        return Err(Error::DimensionMismatch(
            phi_new.nx(),
            phi_new.ny(),
            phi_old.nx(),
            phi_old.ny(),
        ));
    }
    let (nx, ny) = (phi_new.nx(), phi_new.ny());
    let half_eps2 = 0.5 * epsilon * epsilon;
    let mut xi = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let new = phi_new.values()[k];
            let old = phi_old.values()[k];
            xi[k] = new * new * new
                - old
                - half_eps2 * (phi_old.laplacian_unchecked(i, j) + phi_new.laplacian_unchecked(i, j));
        }
    }
    PhaseField::from_values(nx, ny, phi_new.dx(), phi_new.dy(), xi)
}

fn check_step_inputs(
    phi_n: &PhaseField,
    phi_0: &PhaseField,
    mask: &InpaintMask,
    params: &SolverParams,
) -> Result<()> {
    params.validate()?;
    if !phi_n.same_shape(phi_0) {
        return Err(Error::DimensionMismatch(
            phi_n.nx(),
            phi_n.ny(),
            phi_0.nx(),
            phi_0.ny(),
        ));
    }
    if !mask.matches(phi_n) {
        return Err(Error::DimensionMismatch(
            phi_n.nx(),
            phi_n.ny(),
            mask.nx(),
            mask.ny(),
        ));
    }
    Ok(())
}

/// Advance one time step with the whole-grid implicit scheme.
///
/// `phi_0` is the fidelity anchor (the original damaged image); the fidelity
/// term acts only on cells the mask marks intact.
pub fn step_full_2d(
    phi_n: &PhaseField,
    phi_0: &PhaseField,
    mask: &InpaintMask,
    params: &SolverParams,
) -> Result<StepResult> {
    check_step_inputs(phi_n, phi_0, mask, params)?;
    full2d::step(phi_n, phi_0, mask, params)
}

/// Advance one time step with the dimensional-splitting scheme: every row
/// solved as a 1D implicit problem (non-adjacent rows in independent
/// batches), then every column, starting from the row-swept state.
pub fn step_splitting(
    phi_n: &PhaseField,
    phi_0: &PhaseField,
    mask: &InpaintMask,
    params: &SolverParams,
) -> Result<StepResult> {
    step_splitting_with(phi_n, phi_0, mask, params, ExecMode::default())
}

/// [`step_splitting`] with an explicit execution mode. Sequential and
/// parallel execution produce bit-identical states: the update order is
/// always odd-batch-then-even-batch and lines within a batch are
/// independent.
pub fn step_splitting_with(
    phi_n: &PhaseField,
    phi_0: &PhaseField,
    mask: &InpaintMask,
    params: &SolverParams,
    mode: ExecMode,
) -> Result<StepResult> {
    check_step_inputs(phi_n, phi_0, mask, params)?;
    line::step(phi_n, phi_0, mask, params, mode)
}

fn step_once(
    phi_n: &PhaseField,
    phi_0: &PhaseField,
    mask: &InpaintMask,
    params: &SolverParams,
    scheme: Scheme,
    mode: ExecMode,
) -> Result<StepResult> {
    match scheme {
        Scheme::Full2d => full2d::step(phi_n, phi_0, mask, params),
        Scheme::Splitting => line::step(phi_n, phi_0, mask, params, mode),
    }
}

const DT_RETRIES: usize = 4;

/// One step, halving the time step up to four times if the inner Newton
/// iteration fails to converge.
fn step_with_retries(
    phi_n: &PhaseField,
    phi_0: &PhaseField,
    mask: &InpaintMask,
    params: &SolverParams,
    scheme: Scheme,
    mode: ExecMode,
) -> Result<StepResult> {
    let mut attempt = *params;
    for retry in 0..=DT_RETRIES {
        match step_once(phi_n, phi_0, mask, &attempt, scheme, mode) {
            Ok(result) => return Ok(result),
            Err(Error::NonlinearSolveFailure { residual, iters }) if retry < DT_RETRIES => {
                log::warn!(
                    "nonlinear solve failed (residual {residual:.3e} after {iters} iters); \
                     retrying with dt {:.3e}",
                    attempt.dt / 2.0
                );
                attempt.dt /= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    unreachable!("retry loop returns on the last attempt");
}

/// Iterate the chosen stepper from `phi_init` (which also serves as the
/// fidelity anchor) until the L1 distance between successive states drops
/// below `params.steady_tol`, or `params.max_steps` is reached.
///
/// Returns the final field and the number of steps taken.
pub fn run_to_steady(
    phi_init: &PhaseField,
    mask: &InpaintMask,
    params: &SolverParams,
    scheme: Scheme,
) -> Result<(PhaseField, usize)> {
    run_to_steady_with(phi_init, mask, params, scheme, ExecMode::default(), None)
}

/// [`run_to_steady`] with an execution mode and an optional per-step trace
/// sink.
pub fn run_to_steady_with(
    phi_init: &PhaseField,
    mask: &InpaintMask,
    params: &SolverParams,
    scheme: Scheme,
    mode: ExecMode,
    on_step: Option<&mut dyn FnMut(&StepTrace)>,
) -> Result<(PhaseField, usize)> {
    run_to_steady_anchored(phi_init, phi_init, mask, params, scheme, mode, on_step)
}

/// Steady-state driver with a fidelity anchor different from the starting
/// state, as the second inpainting stage needs (it continues from the
/// stage-one output while the fidelity still pulls toward the original
/// image).
#[allow(clippy::too_many_arguments)]
pub fn run_to_steady_anchored(
    start: &PhaseField,
    anchor: &PhaseField,
    mask: &InpaintMask,
    params: &SolverParams,
    scheme: Scheme,
    mode: ExecMode,
    mut on_step: Option<&mut dyn FnMut(&StepTrace)>,
) -> Result<(PhaseField, usize)> {
    check_step_inputs(start, anchor, mask, params)?;
    let mut current = start.clone();
    for step in 1..=params.max_steps {
        let result = step_with_retries(&current, anchor, mask, params, scheme, mode)?;
        let delta = result.field.l1_distance(&current)?;
        if let Some(sink) = on_step.as_deref_mut() {
            sink(&StepTrace {
                step,
                l1_delta: delta,
                energy: result.energy,
                newton_iters: result.newton_iters,
            });
        }
        current = result.field;
        if delta < params.steady_tol {
            return Ok((current, step));
        }
    }
    Ok((current, params.max_steps))
}

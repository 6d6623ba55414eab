//! Dimensional-splitting step: a row sweep then a column sweep.
//!
//! Each line is a 1D implicit problem in its own cells; the variation still
//! uses the full 2D Laplacian, so a line couples to the frozen values of the
//! two adjacent lines. Lines two apart are independent, which allows the
//! odd/even batch order: all even-indexed lines are solved against the
//! untouched state, written back, then all odd-indexed lines against the
//! half-updated state. The batch order is fixed regardless of execution
//! mode, so sequential and parallel runs produce bit-identical states.

use std::cell::RefCell;

use crate::error::Result;
use crate::exec::{try_map_indexed, ExecMode};
use crate::field::{InpaintMask, PhaseField, SolverParams};

use super::banded::BandMatrix;
use super::newton::{self, BandedSystem};
use super::{upwind, StepResult};

#[derive(Clone, Copy)]
enum Axis {
    Row,
    Col,
}

struct LineScratch {
    xi: Vec<f64>,
    flux: Vec<f64>,
    dxi_diag: Vec<f64>,
}

struct LineSystem {
    n: usize,
    inv_h: f64,
    inv_h2: f64,
    inv_hc2: f64,
    inv_dt: f64,
    half_eps2: f64,
    /// Previous-substate values along the line.
    p: Vec<f64>,
    /// 2D ghost Laplacian of the previous substate along the line.
    lap_prev: Vec<f64>,
    /// Frozen neighbour lines; `None` at a wall (ghost = the line itself).
    q_lo: Option<Vec<f64>>,
    q_hi: Option<Vec<f64>>,
    anchor: Vec<f64>,
    lambda: Vec<f64>,
    /// Buffers reused across Newton iterations; a line system lives inside
    /// one solve on one thread.
    scratch: RefCell<LineScratch>,
}

impl LineSystem {
    fn variation(&self, x: &[f64], xi: &mut [f64]) {
        for i in 0..self.n {
            let c = x[i];
            let left = if i > 0 { x[i - 1] } else { c };
            let right = if i + 1 < self.n { x[i + 1] } else { c };
            let lo = self.q_lo.as_ref().map_or(c, |q| q[i]);
            let hi = self.q_hi.as_ref().map_or(c, |q| q[i]);
            let lap = (right - 2.0 * c + left) * self.inv_h2 + (lo - 2.0 * c + hi) * self.inv_hc2;
            xi[i] = c * c * c - self.p[i] - self.half_eps2 * (self.lap_prev[i] + lap);
        }
    }

    fn cross_neighbours(&self) -> f64 {
        (self.q_lo.is_some() as usize + self.q_hi.is_some() as usize) as f64
    }
}

impl BandedSystem for LineSystem {
    fn dim(&self) -> usize {
        self.n
    }

    fn bands(&self) -> (usize, usize) {
        (2, 2)
    }

    fn residual(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        let mut scratch = self.scratch.borrow_mut();
        let LineScratch { xi, flux, .. } = &mut *scratch;
        self.variation(x, xi);
        // Interface fluxes along the line, walls zero.
        flux[0] = 0.0;
        flux[n] = 0.0;
        for ih in 1..n {
            let v = -(xi[ih] - xi[ih - 1]) * self.inv_h;
            flux[ih] = upwind(v);
        }
        for i in 0..n {
            let div = (flux[i + 1] - flux[i]) * self.inv_h;
            out[i] =
                (x[i] - self.p[i]) * self.inv_dt + div + self.lambda[i] * (x[i] - self.anchor[i]);
        }
    }

    fn jacobian(&self, x: &[f64], jac: &mut BandMatrix) {
        let n = self.n;
        let cross = self.cross_neighbours() * self.inv_hc2;
        let mut scratch = self.scratch.borrow_mut();
        let dxi_diag = &mut scratch.dxi_diag;
        // d xi_m / d x_m = 3 x_m^2 - (eps^2/2)(line part + cross part),
        // d xi_m / d x_{m+-1} = -(eps^2/2) / h^2.
        for (m, slot) in dxi_diag.iter_mut().enumerate() {
            let line = -(((m > 0) as usize + (m + 1 < n) as usize) as f64) * self.inv_h2;
            *slot = 3.0 * x[m] * x[m] - self.half_eps2 * (line - cross);
        }
        let dxi_off = -self.half_eps2 * self.inv_h2;
        let w = self.inv_h2;
        // Row i of the residual couples xi at {i-1, i, i+1} through the 1D
        // zero-wall-flux Laplacian weights; expand the composition directly.
        for i in 0..n {
            let neighbours = ((i > 0) as usize + (i + 1 < n) as usize) as f64;
            let w_ii = -neighbours * w;
            jac.add(i, i, self.inv_dt + self.lambda[i] - w_ii * dxi_diag[i]);
            if i > 0 {
                jac.add(i, i - 1, -w_ii * dxi_off);
            }
            if i + 1 < n {
                jac.add(i, i + 1, -w_ii * dxi_off);
            }
            // Contributions through each in-range neighbour m of i.
            if i > 0 {
                let m = i - 1;
                jac.add(i, m, -w * dxi_diag[m]);
                if m > 0 {
                    jac.add(i, m - 1, -w * dxi_off);
                }
                jac.add(i, m + 1, -w * dxi_off);
            }
            if i + 1 < n {
                let m = i + 1;
                jac.add(i, m, -w * dxi_diag[m]);
                jac.add(i, m - 1, -w * dxi_off);
                if m + 1 < n {
                    jac.add(i, m + 1, -w * dxi_off);
                }
            }
        }
    }
}

/// Copy the cells of line `l` (and bookkeeping data) out of the frozen state.
fn build_line(
    state: &PhaseField,
    axis: Axis,
    l: usize,
    phi_0: &PhaseField,
    mask: &InpaintMask,
    params: &SolverParams,
) -> LineSystem {
    let (nx, ny) = (state.nx(), state.ny());
    let (n, lines, h, hc) = match axis {
        Axis::Row => (nx, ny, state.dx(), state.dy()),
        Axis::Col => (ny, nx, state.dy(), state.dx()),
    };
    let cell = |idx: usize, line: usize| match axis {
        Axis::Row => (idx, line),
        Axis::Col => (line, idx),
    };
    let extract = |line: usize| -> Vec<f64> {
        (0..n)
            .map(|idx| {
                let (i, j) = cell(idx, line);
                state.get(i, j)
            })
            .collect()
    };

    let p = extract(l);
    let q_lo = (l > 0).then(|| extract(l - 1));
    let q_hi = (l + 1 < lines).then(|| extract(l + 1));
    let mut lap_prev = Vec::with_capacity(n);
    let mut anchor = Vec::with_capacity(n);
    let mut lambda = Vec::with_capacity(n);
    for idx in 0..n {
        let (i, j) = cell(idx, l);
        lap_prev.push(state.laplacian_unchecked(i, j));
        anchor.push(phi_0.get(i, j));
        lambda.push(mask.lambda(i, j, params.lambda0));
    }

    LineSystem {
        n,
        inv_h: 1.0 / h,
        inv_h2: 1.0 / (h * h),
        inv_hc2: 1.0 / (hc * hc),
        inv_dt: 1.0 / params.dt,
        half_eps2: 0.5 * params.epsilon * params.epsilon,
        p,
        lap_prev,
        q_lo,
        q_hi,
        anchor,
        lambda,
        scratch: RefCell::new(LineScratch {
            xi: vec![0.0; n],
            flux: vec![0.0; n + 1],
            dxi_diag: vec![0.0; n],
        }),
    }
}

fn sweep(
    state: &mut PhaseField,
    axis: Axis,
    phi_0: &PhaseField,
    mask: &InpaintMask,
    params: &SolverParams,
    mode: ExecMode,
    iters: &mut usize,
    residual: &mut f64,
) -> Result<()> {
    let lines = match axis {
        Axis::Row => state.ny(),
        Axis::Col => state.nx(),
    };
    for parity in 0..2 {
        let batch: Vec<usize> = (parity..lines).step_by(2).collect();
        let frozen: &PhaseField = state;
        type Solved = (usize, Vec<f64>, newton::NewtonReport);
        let solved = try_map_indexed(batch.len(), mode, |b| -> Result<Solved> {
            let l = batch[b];
            let system = build_line(frozen, axis, l, phi_0, mask, params);
            let mut x = system.p.clone();
            let report =
                newton::solve(&system, &mut x, params.newton_tol, params.newton_max_iters)?;
            Ok((l, x, report))
        })?;
        for (l, x, report) in solved {
            for (idx, value) in x.into_iter().enumerate() {
                match axis {
                    Axis::Row => state.set(idx, l, value),
                    Axis::Col => state.set(l, idx, value),
                }
            }
            *iters += report.iters;
            *residual = residual.max(report.residual);
        }
    }
    Ok(())
}

pub(super) fn step(
    phi_n: &PhaseField,
    phi_0: &PhaseField,
    mask: &InpaintMask,
    params: &SolverParams,
    mode: ExecMode,
) -> Result<StepResult> {
    let mut state = phi_n.clone();
    let mut iters = 0;
    let mut residual = 0.0;
    sweep(
        &mut state, Axis::Row, phi_0, mask, params, mode, &mut iters, &mut residual,
    )?;
    sweep(
        &mut state, Axis::Col, phi_0, mask, params, mode, &mut iters, &mut residual,
    )?;
    let field = PhaseField::from_values(
        state.nx(),
        state.ny(),
        state.dx(),
        state.dy(),
        state.values().to_vec(),
    )?;
    let energy = field.free_energy(params.epsilon);
    Ok(StepResult {
        field,
        newton_iters: iters,
        residual,
        energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::step_splitting;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_field(nx: usize, ny: usize, seed: u64) -> PhaseField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..nx * ny).map(|_| rng.gen_range(-1.0..1.0)).collect();
        PhaseField::from_values(nx, ny, 1.0, 1.0, values).unwrap()
    }

    #[test]
    fn pure_phases_are_stationary() {
        for value in [1.0, -1.0] {
            let f = PhaseField::constant(6, 5, 1.0, 1.0, value).unwrap();
            let mut mask = InpaintMask::clear(6, 5);
            mask.set_damaged(3, 2, true);
            let result = step_splitting(&f, &f, &mask, &SolverParams::default()).unwrap();
            assert_eq!(result.field, f);
        }
    }

    #[test]
    fn line_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 9;
        let rnd = |rng: &mut ChaCha8Rng| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let system = LineSystem {
            n,
            inv_h: 1.0,
            inv_h2: 1.0,
            inv_hc2: 1.0 / (0.7 * 0.7),
            inv_dt: 1.0 / 0.2,
            half_eps2: 0.5 * 1.2 * 1.2,
            p: rnd(&mut rng),
            lap_prev: rnd(&mut rng),
            q_lo: Some(rnd(&mut rng)),
            q_hi: None,
            anchor: rnd(&mut rng),
            lambda: (0..n)
                .map(|i| if i % 3 == 0 { 0.0 } else { 50.0 })
                .collect(),
            scratch: RefCell::new(LineScratch {
                xi: vec![0.0; n],
                flux: vec![0.0; n + 1],
                dxi_diag: vec![0.0; n],
            }),
        };
        let x: Vec<f64> = rnd(&mut rng);
        let mut jac = BandMatrix::zeros(n, 2, 2);
        system.jacobian(&x, &mut jac);

        let h = 1e-6;
        let mut rp = vec![0.0; n];
        let mut rm = vec![0.0; n];
        for pcol in 0..n {
            let mut xp = x.clone();
            xp[pcol] += h;
            system.residual(&xp, &mut rp);
            xp[pcol] -= 2.0 * h;
            system.residual(&xp, &mut rm);
            for k in 0..n {
                let fd = (rp[k] - rm[k]) / (2.0 * h);
                assert!(
                    (jac.get(k, pcol) - fd).abs() < 1e-6,
                    "J[{k}][{pcol}] = {} vs fd {fd}",
                    jac.get(k, pcol)
                );
            }
        }
    }

    #[test]
    fn mass_is_conserved_without_fidelity() {
        let f = random_field(8, 8, 3);
        let mask = InpaintMask::clear(8, 8);
        let params = SolverParams {
            lambda0: 0.0,
            ..Default::default()
        };
        let mut current = f.clone();
        for _ in 0..5 {
            let next = step_splitting(&current, &f, &mask, &params).unwrap();
            assert!(
                (next.field.total() - current.total()).abs() < 1e-9,
                "mass drifted"
            );
            current = next.field;
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn sequential_and_parallel_steps_are_bit_identical() {
        use crate::exec::ExecMode;
        let f = random_field(9, 7, 44);
        let anchor = random_field(9, 7, 45);
        let mut mask = InpaintMask::clear(9, 7);
        for (i, j) in [(2, 2), (3, 4), (8, 6)] {
            mask.set_damaged(i, j, true);
        }
        let params = SolverParams::default();
        let seq = super::step(&f, &anchor, &mask, &params, ExecMode::Sequential).unwrap();
        let par = super::step(&f, &anchor, &mask, &params, ExecMode::Parallel).unwrap();
        assert_eq!(seq.field.values(), par.field.values());
    }
}

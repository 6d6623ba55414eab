//! Whole-grid implicit step: one banded Newton solve over all cells.

use crate::error::Result;
use crate::field::{InpaintMask, PhaseField, SolverParams};

use super::banded::BandMatrix;
use super::newton::{self, BandedSystem};
use super::{fill_fluxes, StepResult};

/// Ghost-cell Laplacian stencil row at `(i, j)`: pairs of (flat index,
/// weight). Out-of-range neighbours contribute nothing, so the centre weight
/// only counts faces shared with real cells; that is exactly the zero-wall-
/// flux operator.
fn laplacian_row(
    nx: usize,
    ny: usize,
    inv_dx2: f64,
    inv_dy2: f64,
    i: usize,
    j: usize,
    out: &mut Vec<(usize, f64)>,
) {
    out.clear();
    let k = j * nx + i;
    let mut center = 0.0;
    if i > 0 {
        out.push((k - 1, inv_dx2));
        center -= inv_dx2;
    }
    if i + 1 < nx {
        out.push((k + 1, inv_dx2));
        center -= inv_dx2;
    }
    if j > 0 {
        out.push((k - nx, inv_dy2));
        center -= inv_dy2;
    }
    if j + 1 < ny {
        out.push((k + nx, inv_dy2));
        center -= inv_dy2;
    }
    out.push((k, center));
}

struct Full2dSystem<'a> {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    inv_dt: f64,
    half_eps2: f64,
    phi_n: &'a [f64],
    /// Ghost Laplacian of the explicit state, precomputed.
    lap_n: Vec<f64>,
    anchor: &'a [f64],
    /// Per-cell fidelity coefficient (0 inside the inpainting domain).
    lambda: Vec<f64>,
}

impl Full2dSystem<'_> {
    fn variation(&self, x: &[f64], xi: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        let inv_dx2 = 1.0 / (self.dx * self.dx);
        let inv_dy2 = 1.0 / (self.dy * self.dy);
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let c = x[k];
                let left = if i > 0 { x[k - 1] } else { c };
                let right = if i + 1 < nx { x[k + 1] } else { c };
                let down = if j > 0 { x[k - nx] } else { c };
                let up = if j + 1 < ny { x[k + nx] } else { c };
                let lap = (right - 2.0 * c + left) * inv_dx2 + (up - 2.0 * c + down) * inv_dy2;
                xi[k] = c * c * c - self.phi_n[k] - self.half_eps2 * (self.lap_n[k] + lap);
            }
        }
    }
}

impl BandedSystem for Full2dSystem<'_> {
    fn dim(&self) -> usize {
        self.nx * self.ny
    }

    fn bands(&self) -> (usize, usize) {
        // xi couples nearest neighbours, the flux divergence couples xi of
        // nearest neighbours: the residual reaches two rows away.
        (2 * self.nx, 2 * self.nx)
    }

    fn residual(&self, x: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        let mut xi = vec![0.0; nx * ny];
        self.variation(x, &mut xi);
        let mut f = vec![0.0; (nx + 1) * ny];
        let mut g = vec![0.0; nx * (ny + 1)];
        fill_fluxes(nx, ny, self.dx, self.dy, &xi, &mut f, &mut g);
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let div = (f[j * (nx + 1) + i + 1] - f[j * (nx + 1) + i]) / self.dx
                    + (g[(j + 1) * nx + i] - g[j * nx + i]) / self.dy;
                out[k] = (x[k] - self.phi_n[k]) * self.inv_dt
                    + div
                    + self.lambda[k] * (x[k] - self.anchor[k]);
            }
        }
    }

    fn jacobian(&self, x: &[f64], jac: &mut BandMatrix) {
        let (nx, ny) = (self.nx, self.ny);
        let inv_dx2 = 1.0 / (self.dx * self.dx);
        let inv_dy2 = 1.0 / (self.dy * self.dy);
        let mut row_k = Vec::with_capacity(5);
        let mut row_m = Vec::with_capacity(5);
        // R_k = (x_k - phi_k)/dt + lambda_k (x_k - phi0_k) - sum_m w_km xi_m,
        // d xi_m / d x_p = 3 x_m^2 delta_mp - (eps^2/2) w_mp.
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                jac.add(k, k, self.inv_dt + self.lambda[k]);
                laplacian_row(nx, ny, inv_dx2, inv_dy2, i, j, &mut row_k);
                for &(m, w_km) in &row_k {
                    let xm = x[m];
                    jac.add(k, m, -w_km * 3.0 * xm * xm);
                    laplacian_row(nx, ny, inv_dx2, inv_dy2, m % nx, m / nx, &mut row_m);
                    for &(p, w_mp) in &row_m {
                        jac.add(k, p, self.half_eps2 * w_km * w_mp);
                    }
                }
            }
        }
    }
}

pub(super) fn step(
    phi_n: &PhaseField,
    phi_0: &PhaseField,
    mask: &InpaintMask,
    params: &SolverParams,
) -> Result<StepResult> {
    let (nx, ny) = (phi_n.nx(), phi_n.ny());
    let mut lap_n = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            lap_n[j * nx + i] = phi_n.laplacian_unchecked(i, j);
        }
    }
    let mut lambda = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            lambda[j * nx + i] = mask.lambda(i, j, params.lambda0);
        }
    }
    let system = Full2dSystem {
        nx,
        ny,
        dx: phi_n.dx(),
        dy: phi_n.dy(),
        inv_dt: 1.0 / params.dt,
        half_eps2: 0.5 * params.epsilon * params.epsilon,
        phi_n: phi_n.values(),
        lap_n,
        anchor: phi_0.values(),
        lambda,
    };

    let mut x = phi_n.values().to_vec();
    let report = newton::solve(&system, &mut x, params.newton_tol, params.newton_max_iters)?;
    let field = PhaseField::from_values(nx, ny, phi_n.dx(), phi_n.dy(), x)?;
    let energy = field.free_energy(params.epsilon);
    Ok(StepResult {
        field,
        newton_iters: report.iters,
        residual: report.residual,
        energy,
    })
}

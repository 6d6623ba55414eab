//! Damped Newton iteration on banded residual systems.

use crate::error::{Error, Result};

use super::banded::BandMatrix;

/// A nonlinear system `R(x) = 0` with a banded Jacobian.
pub(crate) trait BandedSystem {
    fn dim(&self) -> usize;
    /// `(kl, ku)` bandwidths of the Jacobian.
    fn bands(&self) -> (usize, usize);
    fn residual(&self, x: &[f64], out: &mut [f64]);
    /// Assemble the Jacobian at `x` into `jac` (already zeroed).
    fn jacobian(&self, x: &[f64], jac: &mut BandMatrix);
}

#[derive(Debug)]
pub(crate) struct NewtonReport {
    pub iters: usize,
    pub residual: f64,
}

fn linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Drive `x` to a root of the system, requiring the L-infinity residual to
/// fall below `tol` within `max_iters` iterations. Steps are backtracked
/// (halved) until the residual norm decreases.
pub(crate) fn solve<S: BandedSystem>(
    system: &S,
    x: &mut [f64],
    tol: f64,
    max_iters: usize,
) -> Result<NewtonReport> {
    let n = system.dim();
    debug_assert_eq!(x.len(), n);
    let (kl, ku) = system.bands();

    let mut r = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; n];
    let mut dx = vec![0.0; n];
    let mut jac = BandMatrix::zeros(n, kl, ku);

    system.residual(x, &mut r);
    let mut r_norm = linf(&r);

    for iter in 0..max_iters {
        if r_norm <= tol {
            return Ok(NewtonReport {
                iters: iter,
                residual: r_norm,
            });
        }

        jac.reset();
        system.jacobian(x, &mut jac);
        jac.factor_in_place()
            .map_err(|_| Error::NonlinearSolveFailure {
                residual: r_norm,
                iters: iter,
            })?;
        // Solve J dx = -R.
        for (d, rv) in dx.iter_mut().zip(&r) {
            *d = -rv;
        }
        jac.solve_in_place(&mut dx);

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            for i in 0..n {
                trial[i] = x[i] + alpha * dx[i];
            }
            system.residual(&trial, &mut r_trial);
            let t_norm = linf(&r_trial);
            if t_norm.is_finite() && t_norm < r_norm {
                x.copy_from_slice(&trial);
                std::mem::swap(&mut r, &mut r_trial);
                r_norm = t_norm;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::NonlinearSolveFailure {
                residual: r_norm,
                iters: iter + 1,
            });
        }
    }

    if r_norm <= tol {
        Ok(NewtonReport {
            iters: max_iters,
            residual: r_norm,
        })
    } else {
        Err(Error::NonlinearSolveFailure {
            residual: r_norm,
            iters: max_iters,
        })
    }
}

//! Phase-field grid, double-well potential, discrete operators and the
//! no-flux ghost-cell convention shared by both time steppers.
//!
//! The grid stores cell averages `phi[i][j]` on a uniform `nx x ny` mesh with
//! cell sizes `dx x dy`. The two pure phases sit at the wells `phi = -1` and
//! `phi = +1`; damaged pixels start at mid-grey `phi = 0`.

use crate::error::{Error, Result};

/// Ginzburg-Landau double-well potential `H(phi) = (phi^2 - 1)^2 / 4`.
#[inline]
pub fn potential(phi: f64) -> f64 {
    let s = phi * phi - 1.0;
    0.25 * s * s
}

/// Derivatives of the convex/expansive split `H = H_c - H_e` with
/// `H_c = (phi^4 + 1)/4` and `H_e = phi^2/2`.
///
/// Returns `(H_c'(phi), H_e'(phi)) = (phi^3, phi)`, so that
/// `H'(phi) = phi^3 - phi` is recovered as the difference.
#[inline]
pub fn potential_split_derivatives(phi: f64) -> (f64, f64) {
    (phi * phi * phi, phi)
}

/// Cell-averaged order parameter on a uniform rectangular grid.
///
/// Values are stored row-major: index `(i, j)` maps to `j * nx + i`, with
/// `i` the column (x direction) and `j` the row (y direction).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    values: Vec<f64>,
}

impl PhaseField {
    /// Build a field from explicit values (length must be `nx * ny`).
    pub fn from_values(nx: usize, ny: usize, dx: f64, dy: f64, values: Vec<f64>) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidParam(format!(
                "grid must be at least 2x2, got {nx}x{ny}"
            )));
        }
        if !(dx > 0.0) || !(dy > 0.0) {
            return Err(Error::InvalidParam(format!(
                "cell sizes must be positive, got dx={dx}, dy={dy}"
            )));
        }
        if values.len() != nx * ny {
            return Err(Error::InvalidParam(format!(
                "expected {} values for a {nx}x{ny} grid, got {}",
                nx * ny,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("non-finite field value".into()));
        }
        Ok(Self {
            nx,
            ny,
            dx,
            dy,
            values,
        })
    }

    /// Constant field.
    pub fn constant(nx: usize, ny: usize, dx: f64, dy: f64, value: f64) -> Result<Self> {
        Self::from_values(nx, ny, dx, dy, vec![value; nx * ny])
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.idx(i, j);
        self.values[k] = value;
    }

    /// True when both fields share grid dimensions and cell sizes.
    pub fn same_shape(&self, other: &PhaseField) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.dx == other.dx && self.dy == other.dy
    }

    /// Five-point Laplacian with the no-flux ghost convention: an
    /// out-of-range neighbour takes the value of the cell itself
    /// (`phi_{0,j} = phi_{1,j}` and friends), so its contribution vanishes.
    pub fn laplacian(&self, i: usize, j: usize) -> Result<f64> {
        if i >= self.nx || j >= self.ny {
            return Err(Error::IndexOutOfRange {
                i,
                j,
                nx: self.nx,
                ny: self.ny,
            });
        }
        Ok(self.laplacian_unchecked(i, j))
    }

    #[inline]
    pub(crate) fn laplacian_unchecked(&self, i: usize, j: usize) -> f64 {
        let c = self.get(i, j);
        let left = if i > 0 { self.get(i - 1, j) } else { c };
        let right = if i + 1 < self.nx { self.get(i + 1, j) } else { c };
        let down = if j > 0 { self.get(i, j - 1) } else { c };
        let up = if j + 1 < self.ny { self.get(i, j + 1) } else { c };
        (right - 2.0 * c + left) / (self.dx * self.dx) + (up - 2.0 * c + down) / (self.dy * self.dy)
    }

    /// Discrete free energy
    /// `sum_cells H(phi) * dx*dy + (eps^2/2) * sum_interfaces (D phi)^2 * dx*dy`,
    /// with forward differences on interior interfaces only (no-flux walls
    /// contribute nothing).
    pub fn free_energy(&self, epsilon: f64) -> f64 {
        let cell = self.dx * self.dy;
        let mut bulk = 0.0;
        for &v in &self.values {
            bulk += potential(v);
        }
        let mut grad = 0.0;
        for j in 0..self.ny {
            for i in 0..self.nx - 1 {
                let d = (self.get(i + 1, j) - self.get(i, j)) / self.dx;
                grad += d * d;
            }
        }
        for j in 0..self.ny - 1 {
            for i in 0..self.nx {
                let d = (self.get(i, j + 1) - self.get(i, j)) / self.dy;
                grad += d * d;
            }
        }
        (bulk + 0.5 * epsilon * epsilon * grad) * cell
    }

    /// `L1` distance `sum |a - b| * dx*dy`, used as the steady-state monitor.
    pub fn l1_distance(&self, other: &PhaseField) -> Result<f64> {
        if !self.same_shape(other) {
            return Err(Error::DimensionMismatch(
                self.nx, self.ny, other.nx, other.ny,
            ));
        }
        let cell = self.dx * self.dy;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * cell)
    }

    /// Sum of all cell values (mass up to the `dx*dy` factor).
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Largest absolute cellwise difference.
    pub fn linf_distance(&self, other: &PhaseField) -> Result<f64> {
        if !self.same_shape(other) {
            return Err(Error::DimensionMismatch(
                self.nx, self.ny, other.nx, other.ny,
            ));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Clamp every value into `[lo, hi]`.
    pub fn clamp(&mut self, lo: f64, hi: f64) {
        for v in &mut self.values {
            *v = v.clamp(lo, hi);
        }
    }
}

/// Boolean grid marking the inpainting domain `D` (damaged cells).
///
/// The fidelity coefficient is zero inside `D` and `lambda0` outside, so the
/// solver leaves damaged cells free to evolve while pinning the rest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InpaintMask {
    nx: usize,
    ny: usize,
    damaged: Vec<bool>,
}

impl InpaintMask {
    /// All-intact mask.
    pub fn clear(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            damaged: vec![false; nx * ny],
        }
    }

    pub fn from_damaged(nx: usize, ny: usize, damaged: Vec<bool>) -> Result<Self> {
        if damaged.len() != nx * ny {
            return Err(Error::InvalidParam(format!(
                "expected {} mask cells for a {nx}x{ny} grid, got {}",
                nx * ny,
                damaged.len()
            )));
        }
        Ok(Self { nx, ny, damaged })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn is_damaged(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.nx && j < self.ny);
        self.damaged[j * self.nx + i]
    }

    pub fn set_damaged(&mut self, i: usize, j: usize, damaged: bool) {
        debug_assert!(i < self.nx && j < self.ny);
        self.damaged[j * self.nx + i] = damaged;
    }

    /// Fidelity coefficient for a cell: `0` inside `D`, `lambda0` outside.
    #[inline]
    pub fn lambda(&self, i: usize, j: usize, lambda0: f64) -> f64 {
        if self.is_damaged(i, j) {
            0.0
        } else {
            lambda0
        }
    }

    pub fn damaged_cells(&self) -> usize {
        self.damaged.iter().filter(|&&d| d).count()
    }

    pub fn matches(&self, field: &PhaseField) -> bool {
        self.nx == field.nx() && self.ny == field.ny()
    }

    pub fn damaged_slice(&self) -> &[bool] {
        &self.damaged
    }
}

/// Parameters of the implicit finite-volume steppers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    /// Interface-width parameter of the phase-field model.
    pub epsilon: f64,
    /// Fidelity strength outside the inpainting domain.
    pub lambda0: f64,
    /// Time step.
    pub dt: f64,
    /// L-infinity residual tolerance of the inner Newton iteration.
    pub newton_tol: f64,
    /// Iteration cap of the inner Newton iteration.
    pub newton_max_iters: usize,
    /// L1 distance between successive states below which the evolution is
    /// considered steady.
    pub steady_tol: f64,
    /// Cap on time steps taken by [`crate::solver::run_to_steady`].
    pub max_steps: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            lambda0: 1000.0,
            dt: 0.1,
            newton_tol: 1e-8,
            newton_max_iters: 100,
            steady_tol: 1e-4,
            max_steps: 5000,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParam(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.lambda0 >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "lambda0 must be nonnegative, got {}",
                self.lambda0
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParam(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.newton_tol > 0.0) || !(self.steady_tol > 0.0) {
            return Err(Error::InvalidParam("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_field(nx: usize, ny: usize, seed: u64) -> PhaseField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..nx * ny).map(|_| rng.gen_range(-1.0..1.0)).collect();
        PhaseField::from_values(nx, ny, 1.0, 1.0, values).unwrap()
    }

    // Independent stencil: build the (nx+2)x(ny+2) ghost-padded array
    // explicitly, then apply the plain five-point formula.
    fn laplacian_oracle(f: &PhaseField, i: usize, j: usize) -> f64 {
        let (nx, ny) = (f.nx(), f.ny());
        let mut padded = vec![vec![0.0; ny + 2]; nx + 2];
        for ii in 0..nx {
            for jj in 0..ny {
                padded[ii + 1][jj + 1] = f.get(ii, jj);
            }
        }
        for jj in 0..ny {
            padded[0][jj + 1] = f.get(0, jj);
            padded[nx + 1][jj + 1] = f.get(nx - 1, jj);
        }
        for ii in 0..nx {
            padded[ii + 1][0] = f.get(ii, 0);
            padded[ii + 1][ny + 1] = f.get(ii, ny - 1);
        }
        let (pi, pj) = (i + 1, j + 1);
        (padded[pi + 1][pj] - 2.0 * padded[pi][pj] + padded[pi - 1][pj]) / (f.dx() * f.dx())
            + (padded[pi][pj + 1] - 2.0 * padded[pi][pj] + padded[pi][pj - 1]) / (f.dy() * f.dy())
    }

    #[test]
    fn potential_at_wells_and_origin() {
        assert_eq!(potential(1.0), 0.0);
        assert_eq!(potential(-1.0), 0.0);
        assert_eq!(potential(0.0), 0.25);
    }

    #[test]
    fn potential_split_examples() {
        assert_eq!(potential_split_derivatives(0.0), (0.0, 0.0));
        assert_eq!(potential_split_derivatives(1.0), (1.0, 1.0));
        assert_eq!(potential_split_derivatives(2.0), (8.0, 2.0));
    }

    #[test]
    fn potential_split_recovers_derivative() {
        for k in -20..=20 {
            let phi = k as f64 / 7.0;
            let (hc, he) = potential_split_derivatives(phi);
            assert_eq!(hc - he, phi * phi * phi - phi);
        }
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let f = PhaseField::constant(5, 4, 0.7, 1.3, 0.42).unwrap();
        for j in 0..4 {
            for i in 0..5 {
                assert_eq!(f.laplacian(i, j).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn laplacian_point_source_stencil() {
        // 3x3 grid, unit spacing, center one, rest zero.
        let mut f = PhaseField::constant(3, 3, 1.0, 1.0, 0.0).unwrap();
        f.set(1, 1, 1.0);
        assert_eq!(f.laplacian(1, 1).unwrap(), -4.0);
        // Edge midpoints see the center through one face.
        for (i, j) in [(0, 1), (2, 1), (1, 0), (1, 2)] {
            assert_eq!(f.laplacian(i, j).unwrap(), 1.0);
        }
        // Corners only touch edge cells, all zero; ghosts mirror the corner.
        for (i, j) in [(0, 0), (2, 0), (0, 2), (2, 2)] {
            assert_eq!(f.laplacian(i, j).unwrap(), 0.0);
        }
        // Cross-check every cell against the padded-array oracle.
        for j in 0..3 {
            for i in 0..3 {
                assert_eq!(f.laplacian(i, j).unwrap(), laplacian_oracle(&f, i, j));
            }
        }
    }

    #[test]
    fn laplacian_matches_oracle_on_random_fields() {
        for seed in 0..5 {
            let f = random_field(8, 6, seed);
            for j in 0..f.ny() {
                for i in 0..f.nx() {
                    let got = f.laplacian(i, j).unwrap();
                    let want = laplacian_oracle(&f, i, j);
                    assert!(
                        (got - want).abs() < 1e-14,
                        "mismatch at ({i},{j}): {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn laplacian_is_linear() {
        let a = random_field(8, 8, 11);
        let b = random_field(8, 8, 12);
        let (alpha, beta) = (0.37, -1.91);
        let combo = PhaseField::from_values(
            8,
            8,
            1.0,
            1.0,
            a.values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| alpha * x + beta * y)
                .collect(),
        )
        .unwrap();
        for j in 0..8 {
            for i in 0..8 {
                let lhs = combo.laplacian(i, j).unwrap();
                let rhs = alpha * a.laplacian(i, j).unwrap() + beta * b.laplacian(i, j).unwrap();
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn laplacian_telescopes_to_zero() {
        for seed in 0..4 {
            let f = random_field(9, 7, seed);
            let mut sum = 0.0;
            for j in 0..f.ny() {
                for i in 0..f.nx() {
                    sum += f.laplacian(i, j).unwrap() * f.dx() * f.dy();
                }
            }
            assert!(
                sum.abs() < 1e-12 * (f.nx() * f.ny()) as f64,
                "no-flux telescoping violated: {sum}"
            );
        }
    }

    #[test]
    fn laplacian_rejects_out_of_range() {
        let f = PhaseField::constant(3, 3, 1.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            f.laplacian(3, 0),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn free_energy_of_pure_phase_is_zero() {
        let f = PhaseField::constant(6, 6, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(f.free_energy(0.8), 0.0);
    }

    #[test]
    fn free_energy_of_grey_field() {
        // H(0) = 1/4 in each of the 16 cells, no gradients.
        let f = PhaseField::constant(4, 4, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(f.free_energy(2.0), 4.0);
    }

    #[test]
    fn free_energy_striped_2x2() {
        // [[-1, 1], [-1, 1]]: wells contribute nothing, the two x interfaces
        // each carry a jump of 2. Cell-by-cell oracle:
        //   bulk  = 4 * H(+-1) = 0
        //   grad  = 2 interfaces * (2/1)^2 = 8
        //   total = (0 + 0.5 * 1 * 8) * 1 = 4
        let f = PhaseField::from_values(2, 2, 1.0, 1.0, vec![-1.0, 1.0, -1.0, 1.0]).unwrap();
        assert_eq!(f.free_energy(1.0), 4.0);
    }

    #[test]
    fn free_energy_nonnegative_on_random_fields() {
        for seed in 0..10 {
            let f = random_field(7, 5, seed);
            for eps in [0.3, 1.0, 1.5] {
                assert!(f.free_energy(eps) >= 0.0);
            }
        }
    }

    #[test]
    fn l1_distance_basics() {
        let a = PhaseField::constant(2, 2, 1.0, 1.0, 0.25).unwrap();
        assert_eq!(a.l1_distance(&a).unwrap(), 0.0);
        let b = PhaseField::constant(2, 2, 1.0, 1.0, 0.75).unwrap();
        assert_eq!(a.l1_distance(&b).unwrap(), 2.0);
        let c = PhaseField::constant(3, 2, 1.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            a.l1_distance(&c),
            Err(Error::DimensionMismatch(..))
        ));
    }

    #[test]
    fn l1_distance_scales_with_cell_area() {
        let a = PhaseField::constant(2, 2, 0.5, 0.5, 0.0).unwrap();
        let b = PhaseField::constant(2, 2, 0.5, 0.5, 1.0).unwrap();
        assert_eq!(a.l1_distance(&b).unwrap(), 1.0);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(PhaseField::constant(1, 5, 1.0, 1.0, 0.0).is_err());
        assert!(PhaseField::constant(5, 5, 0.0, 1.0, 0.0).is_err());
        assert!(PhaseField::from_values(2, 2, 1.0, 1.0, vec![0.0; 3]).is_err());
        assert!(PhaseField::from_values(2, 2, 1.0, 1.0, vec![0.0, 0.0, 0.0, f64::NAN]).is_err());
    }

    #[test]
    fn mask_lambda_and_count() {
        let mut m = InpaintMask::clear(3, 2);
        assert_eq!(m.damaged_cells(), 0);
        m.set_damaged(1, 0, true);
        assert_eq!(m.lambda(1, 0, 1000.0), 0.0);
        assert_eq!(m.lambda(0, 0, 1000.0), 1000.0);
        assert_eq!(m.damaged_cells(), 1);
    }

    #[test]
    fn solver_params_validation() {
        assert!(SolverParams::default().validate().is_ok());
        let bad = SolverParams {
            epsilon: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverParams {
            dt: -0.1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}

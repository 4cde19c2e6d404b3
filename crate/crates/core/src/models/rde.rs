use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{Dynamics, ModelError};
use crate::linalg::{BandMatrix, CyclicBandSolver, LinalgError};
use crate::Real;

/// Physical coefficients of the one-dimensional rotating-detonation model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RdeParams {
    /// Viscosity ν.
    pub nu: f64,
    /// Pre-exponential factor of the heat release.
    pub k_pre: f64,
    /// Activation energy α.
    pub alpha: f64,
    /// Ignition energy η_c.
    pub eta_c: f64,
    /// Center η_p of the injection sigmoid.
    pub eta_p: f64,
    /// Slope r of the injection sigmoid.
    pub r: f64,
    /// Energy-loss coefficient ε.
    pub epsilon: f64,
    /// Injection parameter μ.
    pub mu: f64,
}

impl Default for RdeParams {
    fn default() -> Self {
        Self {
            nu: 0.01,
            k_pre: 1.0,
            alpha: 0.3,
            eta_c: 1.1,
            eta_p: 0.5,
            r: 1.0,
            epsilon: 0.11,
            mu: 3.5,
        }
    }
}

impl RdeParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("nu", self.nu),
            ("k_pre", self.k_pre),
            ("alpha", self.alpha),
            ("eta_c", self.eta_c),
            ("eta_p", self.eta_p),
            ("r", self.r),
            ("epsilon", self.epsilon),
            ("mu", self.mu),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(ModelError::Invalid(format!("{name} must be finite, got {v}")));
        }
        if self.nu < 0.0 {
            return Err(ModelError::Invalid(format!("nu must be non-negative, got {}", self.nu)));
        }
        if self.alpha <= 0.0 {
            return Err(ModelError::Invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Equidistant periodic grid on `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid1D {
    num_points: usize,
}

impl Grid1D {
    pub fn new(num_points: usize) -> Result<Self, ModelError> {
        if num_points < 4 {
            return Err(ModelError::Invalid(format!(
                "grid needs at least 4 points, got {num_points}"
            )));
        }
        Ok(Self { num_points })
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / self.num_points as f64
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    /// Grid index nearest to `x` (periodic wrap; ties go to the lower index).
    pub fn nearest_index(&self, x: f64) -> usize {
        let s = x / self.dx();
        let lower = s.floor();
        let frac = s - lower;
        let idx = if frac > 0.5 { lower + 1.0 } else { lower };
        (idx as i64).rem_euclid(self.num_points as i64) as usize
    }
}

/// Pulse profile `1.5 · sech²⁰(x − 1)` used for the initial intensity.
pub fn initial_pulse(x: f64) -> f64 {
    1.5 * (1.0 / (x - 1.0).cosh()).powi(20)
}

/// Single-pulse start: `η(x, 0) = 1.5 · sech²⁰(x − 1)`, `λ(x, 0) = 0`.
pub fn rde_initial_condition<T: Real>(grid: &Grid1D) -> DVector<T> {
    let m = grid.num_points();
    let mut q = DVector::zeros(2 * m);
    for j in 0..m {
        q[j] = T::lit(initial_pulse(grid.coordinate(j)));
    }
    q
}

/// Rotating-detonation model discretized with first-order upwinding for the
/// advection term, central differences for diffusion, and periodic wrap.
///
/// The state stacks the two fields: `[η_0 … η_{M−1}, λ_0 … λ_{M−1}]`.
#[derive(Debug, Clone)]
pub struct RdeModel<T> {
    params: RdeParams,
    grid: Grid1D,
    nu: T,
    k_pre: T,
    alpha: T,
    eta_c: T,
    eta_p: T,
    r: T,
    epsilon: T,
    mu: T,
    inv_dx: T,
    inv_dx2: T,
}

impl<T: Real> RdeModel<T> {
    pub fn new(params: RdeParams, grid: Grid1D) -> Result<Self, ModelError> {
        params.validate()?;
        let dx = grid.dx();
        Ok(Self {
            params,
            grid,
            nu: T::lit(params.nu),
            k_pre: T::lit(params.k_pre),
            alpha: T::lit(params.alpha),
            eta_c: T::lit(params.eta_c),
            eta_p: T::lit(params.eta_p),
            r: T::lit(params.r),
            epsilon: T::lit(params.epsilon),
            mu: T::lit(params.mu),
            inv_dx: T::lit(1.0 / dx),
            inv_dx2: T::lit(1.0 / (dx * dx)),
        })
    }

    pub fn params(&self) -> &RdeParams {
        &self.params
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// Heat release ω(η).
    pub fn heat_release(&self, eta: T) -> T {
        self.k_pre * ((eta - self.eta_c) / self.alpha).exp()
    }

    /// Injection β(η; μ).
    pub fn injection(&self, eta: T) -> T {
        self.mu / (T::one() + (self.r * (eta - self.eta_p)).exp())
    }

    fn injection_derivative(&self, eta: T) -> T {
        let e = (self.r * (eta - self.eta_p)).exp();
        if !e.is_finite() {
            return T::zero();
        }
        let d = T::one() + e;
        -self.mu * self.r * e / (d * d)
    }

    #[inline]
    fn neighbors(&self, j: usize) -> (usize, usize) {
        let m = self.grid.num_points;
        ((j + m - 1) % m, (j + 1) % m)
    }

    /// f̄(q) with input validation.
    pub fn rhs_checked(&self, q: &DVector<T>) -> Result<DVector<T>, ModelError> {
        if q.len() != self.dim() {
            return Err(ModelError::Invalid(format!(
                "state has length {}, expected {}",
                q.len(),
                self.dim()
            )));
        }
        super::evaluate_rhs(self, q)
    }

    /// Interleaved position of stacked index `i`: η_j → 2j, λ_j → 2j + 1.
    #[inline]
    fn interleave(&self, i: usize) -> usize {
        let m = self.grid.num_points;
        if i < m {
            2 * i
        } else {
            2 * (i - m) + 1
        }
    }
}

impl<T: Real> Dynamics<T> for RdeModel<T> {
    fn dim(&self) -> usize {
        2 * self.grid.num_points
    }

    fn stencil(&self, i: usize, out: &mut Vec<usize>) {
        let m = self.grid.num_points;
        let j = i % m;
        let (l, r) = self.neighbors(j);
        if i < m {
            out.extend_from_slice(&[l, j, r, m + j]);
        } else {
            out.extend_from_slice(&[m + l, m + j, m + r, j]);
        }
    }

    fn rhs_component(&self, q: &[T], i: usize) -> T {
        let m = self.grid.num_points;
        let j = i % m;
        let (l, r) = self.neighbors(j);
        let eta = q[j];
        let lam = q[m + j];
        let gain = (T::one() - lam) * self.heat_release(eta);
        if i < m {
            let slope = if eta >= T::zero() {
                (eta - q[l]) * self.inv_dx
            } else {
                (q[r] - eta) * self.inv_dx
            };
            let lap = (q[l] - eta - eta + q[r]) * self.inv_dx2;
            -eta * slope + self.nu * lap + gain - self.epsilon * eta
        } else {
            let lap = (q[m + l] - lam - lam + q[m + r]) * self.inv_dx2;
            self.nu * lap + gain - self.injection(eta) * lam
        }
    }

    fn jacobian_row(&self, q: &[T], i: usize, out: &mut Vec<(usize, T)>) {
        let m = self.grid.num_points;
        let j = i % m;
        let (l, r) = self.neighbors(j);
        let eta = q[j];
        let lam = q[m + j];
        let omega = self.heat_release(eta);
        let d_gain_d_eta = (T::one() - lam) * omega / self.alpha;
        let d_gain_d_lam = -omega;
        let diff_off = self.nu * self.inv_dx2;
        let diff_diag = -(diff_off + diff_off);
        if i < m {
            let (d_self, d_left, d_right) = if eta >= T::zero() {
                (
                    -(eta + eta - q[l]) * self.inv_dx,
                    eta * self.inv_dx,
                    T::zero(),
                )
            } else {
                (
                    -(q[r] - eta - eta) * self.inv_dx,
                    T::zero(),
                    -eta * self.inv_dx,
                )
            };
            out.push((l, d_left + diff_off));
            out.push((j, d_self + diff_diag + d_gain_d_eta - self.epsilon));
            out.push((r, d_right + diff_off));
            out.push((m + j, d_gain_d_lam));
        } else {
            let beta = self.injection(eta);
            out.push((m + l, diff_off));
            out.push((m + j, diff_diag + d_gain_d_lam - beta));
            out.push((m + r, diff_off));
            out.push((j, d_gain_d_eta - self.injection_derivative(eta) * lam));
        }
    }

    fn rhs(&self, q: &[T], out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.rhs_component(q, i);
        }
    }

    /// Banded solve in interleaved ordering; the periodic wrap shows up as
    /// four corner entries handled as a low-rank correction.
    fn solve_shifted(&self, q: &[T], shift: T, rhs: &[T]) -> Result<Vec<T>, LinalgError> {
        let n = self.dim();
        let mut band = BandMatrix::zeros(n, 2, 2);
        let mut corners: Vec<(usize, usize, T)> = Vec::with_capacity(4);
        let mut row = Vec::with_capacity(4);
        for i in 0..n {
            let pi = self.interleave(i);
            band.add(pi, pi, T::one());
            row.clear();
            self.jacobian_row(q, i, &mut row);
            for &(c, v) in &row {
                let pc = self.interleave(c);
                let value = -shift * v;
                if band.in_band(pi, pc) {
                    band.add(pi, pc, value);
                } else if value != T::zero() {
                    corners.push((pi, pc, value));
                }
            }
        }
        let solver = CyclicBandSolver::new(band, &corners)?;
        let mut permuted = vec![T::zero(); n];
        for (i, &v) in rhs.iter().enumerate() {
            permuted[self.interleave(i)] = v;
        }
        let solved = solver.solve(&permuted)?;
        Ok((0..n).map(|i| solved[self.interleave(i)]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(m: usize) -> RdeModel<f64> {
        RdeModel::new(RdeParams::default(), Grid1D::new(m).unwrap()).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, m: usize) -> DVector<f64> {
        DVector::from_fn(2 * m, |i, _| {
            if i < m {
                rng.gen_range(-0.5..2.5)
            } else {
                rng.gen_range(0.0..1.0)
            }
        })
    }

    #[test]
    fn grid_rejects_tiny_meshes() {
        assert!(Grid1D::new(3).is_err());
        let g = Grid1D::new(1024).unwrap();
        assert!((g.dx() * 1024.0 - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn nearest_index_ties_go_low() {
        let g = Grid1D::new(8).unwrap();
        assert_eq!(g.nearest_index(g.coordinate(3)), 3);
        assert_eq!(g.nearest_index(g.coordinate(3) + 0.5 * g.dx()), 3);
        assert_eq!(g.nearest_index(g.coordinate(3) + 0.51 * g.dx()), 4);
        assert_eq!(g.nearest_index(2.0 * PI - 0.1 * g.dx()), 0);
    }

    #[test]
    fn initial_condition_is_single_pulse() {
        let g = Grid1D::new(64).unwrap();
        let q: DVector<f64> = rde_initial_condition(&g);
        assert!(q.rows(64, 64).iter().all(|&v| v == 0.0));
        let peak = q.rows(0, 64).max();
        assert!(peak <= 1.5 && peak > 1.4);
    }

    #[test]
    fn pulse_peaks_at_one_and_is_symmetric() {
        assert_eq!(initial_pulse(1.0), 1.5);
        // sech(3) = 2 / (e^3 + e^-3)
        let sech3 = 2.0 / (3.0f64.exp() + (-3.0f64).exp());
        let expected = 1.5 * sech3.powi(20);
        assert_relative_eq!(initial_pulse(4.0), expected, max_relative = 1e-12);
        assert_relative_eq!(initial_pulse(-2.0), expected, max_relative = 1e-12);
        for d in [0.1, 0.77, 1.3, 2.9] {
            assert_relative_eq!(initial_pulse(1.0 + d), initial_pulse(1.0 - d), max_relative = 1e-12);
        }
    }

    #[test]
    fn rhs_at_rest_is_pure_heat_release() {
        let m = model(16);
        let q = DVector::zeros(32);
        let f = m.rhs_checked(&q).unwrap();
        let omega0 = (-1.1f64 / 0.3).exp();
        assert_relative_eq!(omega0, 2.557e-2, max_relative = 1e-3);
        for v in f.iter() {
            assert_relative_eq!(*v, omega0, max_relative = 1e-14);
        }
    }

    #[test]
    fn rhs_for_burnt_state_is_injection_loss() {
        let m = model(16);
        let c = 0.8;
        let mut q = DVector::from_element(32, 1.0);
        q.rows_mut(0, 16).fill(c);
        let f = m.rhs_checked(&q).unwrap();
        let beta = 3.5 / (1.0 + (c - 0.5f64).exp());
        for v in f.rows(16, 16).iter() {
            assert_relative_eq!(*v, -beta, max_relative = 1e-13);
        }
    }

    #[test]
    fn rhs_rejects_non_finite_state() {
        let m = model(8);
        let mut q = DVector::zeros(16);
        q[5] = f64::NAN;
        assert_eq!(m.rhs_checked(&q), Err(ModelError::NonFinite { index: 5 }));
    }

    #[test]
    fn rhs_matches_dense_stencil_oracle() {
        let mm = 8;
        let model = model(mm);
        let p = RdeParams::default();
        let dx = 2.0 * PI / mm as f64;
        for sign in [1.0, -1.0] {
            let mut q = DVector::zeros(2 * mm);
            q[3] = 0.7 * sign;
            // Dense difference operators.
            let mut back = DMatrix::zeros(mm, mm);
            let mut fwd = DMatrix::zeros(mm, mm);
            let mut lap = DMatrix::zeros(mm, mm);
            for j in 0..mm {
                let l = (j + mm - 1) % mm;
                let r = (j + 1) % mm;
                back[(j, j)] = 1.0 / dx;
                back[(j, l)] = -1.0 / dx;
                fwd[(j, r)] = 1.0 / dx;
                fwd[(j, j)] = -1.0 / dx;
                lap[(j, l)] += 1.0 / (dx * dx);
                lap[(j, j)] -= 2.0 / (dx * dx);
                lap[(j, r)] += 1.0 / (dx * dx);
            }
            let eta = q.rows(0, mm).into_owned();
            let lam = q.rows(mm, mm).into_owned();
            let db = &back * &eta;
            let df = &fwd * &eta;
            let le = &lap * &eta;
            let ll = &lap * &lam;
            let f = model.rhs_checked(&q).unwrap();
            for j in 0..mm {
                let slope = if eta[j] >= 0.0 { db[j] } else { df[j] };
                let omega = p.k_pre * ((eta[j] - p.eta_c) / p.alpha).exp();
                let beta = p.mu / (1.0 + (p.r * (eta[j] - p.eta_p)).exp());
                let f_eta = -eta[j] * slope + p.nu * le[j] + (1.0 - lam[j]) * omega - p.epsilon * eta[j];
                let f_lam = p.nu * ll[j] + (1.0 - lam[j]) * omega - beta * lam[j];
                assert_relative_eq!(f[j], f_eta, epsilon = 1e-12);
                assert_relative_eq!(f[mm + j], f_lam, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rhs_commutes_with_circular_shift() {
        let mm = 16;
        let m = model(mm);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_state(&mut rng, mm);
        let shift = |v: &DVector<f64>| {
            DVector::from_fn(2 * mm, |i, _| {
                let field = i / mm;
                let j = i % mm;
                v[field * mm + (j + mm - 1) % mm]
            })
        };
        let f_shifted = m.rhs_checked(&shift(&q)).unwrap();
        let shifted_f = shift(&m.rhs_checked(&q).unwrap());
        assert_eq!(f_shifted, shifted_f);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mm = 16;
        let m = model(mm);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 1e-6;
        for _ in 0..20 {
            let q = random_state(&mut rng, mm);
            let jac = m.jacobian(q.as_slice()).to_dense();
            for i in 0..2 * mm {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[i] += h;
                qm[i] -= h;
                let fd = (m.rhs_checked(&qp).unwrap() - m.rhs_checked(&qm).unwrap()) / (2.0 * h);
                let col = jac.column(i);
                assert!((fd - col).norm() <= 1e-5 * (1.0 + col.norm()), "column {i}");
            }
        }
    }

    #[test]
    fn jacobian_reaction_block_for_constant_state() {
        let mm = 8;
        let m = model(mm);
        let (c, lam) = (0.9, 0.25);
        let mut q = DVector::from_element(2 * mm, lam);
        q.rows_mut(0, mm).fill(c);
        let jac = m.jacobian(q.as_slice());
        let p = RdeParams::default();
        let omega = ((c - p.eta_c) / p.alpha).exp();
        let e = (c - p.eta_p).exp();
        let beta = p.mu / (1.0 + e);
        let dbeta = -p.mu * e / ((1.0 + e) * (1.0 + e));
        let dx = 2.0 * PI / mm as f64;
        let diff = -2.0 * p.nu / (dx * dx);
        // Upwind on a constant positive state: -(2η - η_{j-1})/dx = -c/dx.
        let adv = -c / dx;
        for j in 0..mm {
            assert_relative_eq!(jac.get(j, j), adv + diff + (1.0 - lam) * omega / p.alpha - p.epsilon, epsilon = 1e-12);
            assert_relative_eq!(jac.get(j, mm + j), -omega, epsilon = 1e-12);
            assert_relative_eq!(jac.get(mm + j, mm + j), diff - omega - beta, epsilon = 1e-12);
            assert_relative_eq!(jac.get(mm + j, j), (1.0 - lam) * omega / p.alpha - dbeta * lam, epsilon = 1e-12);
        }
    }

    #[test]
    fn inviscid_jacobian_has_no_lambda_coupling() {
        let params = RdeParams { nu: 0.0, ..RdeParams::default() };
        let m: RdeModel<f64> = RdeModel::new(params, Grid1D::new(8).unwrap()).unwrap();
        let q = DVector::from_element(16, 0.5);
        let jac = m.jacobian(q.as_slice());
        for j in 0..8 {
            let l = (j + 7) % 8;
            let r = (j + 1) % 8;
            assert_eq!(jac.get(8 + j, 8 + l), 0.0);
            assert_eq!(jac.get(8 + j, 8 + r), 0.0);
            // η ≥ 0 so the forward neighbour carries no advection and no diffusion.
            assert_eq!(jac.get(j, r), 0.0);
        }
    }

    #[test]
    fn banded_solve_matches_dense_fallback() {
        let mm = 12;
        let m = model(mm);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let q = random_state(&mut rng, mm);
        let b: Vec<f64> = (0..2 * mm).map(|i| (i as f64 * 0.37).cos()).collect();
        let jac = m.jacobian(q.as_slice()).to_dense();
        let a = DMatrix::identity(2 * mm, 2 * mm) - jac * 0.01;
        let dense = a.lu().solve(&DVector::from_vec(b.clone())).unwrap();
        let fast = m.solve_shifted(q.as_slice(), 0.01, &b).unwrap();
        assert_relative_eq!(DVector::from_vec(fast), dense, epsilon = 1e-10);
    }
}

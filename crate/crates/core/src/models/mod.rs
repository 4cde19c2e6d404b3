//! Full-order dynamical systems, their right-hand sides and Jacobians, and
//! implicit-Euler time stepping.

mod integrate;
mod linear;
mod rde;

pub use integrate::{
    fom_trajectory, implicit_euler_step, FomError, FomStepper, NewtonOptions, StepReport,
};
pub use linear::{LinearModel, ZeroModel};
pub use rde::{initial_pulse, rde_initial_condition, Grid1D, RdeModel, RdeParams};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, LinalgError, SparseMatrix};
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("state entry {index} is not finite")]
    NonFinite { index: usize },
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("linear solve failed: {0}")]
    Linalg(#[from] LinalgError),
    #[error("invalid model setup: {0}")]
    Invalid(String),
}

/// Semi-discrete dynamics `dq/dt = f̄(q)` with component-wise access.
///
/// Component access is what makes empirical interpolation cheap: evaluating
/// component `i` reads only the state entries listed by [`Dynamics::stencil`].
pub trait Dynamics<T: Real>: Sync {
    /// State dimension `N`.
    fn dim(&self) -> usize;

    /// Appends to `out` the state indices read by component `i`.
    fn stencil(&self, i: usize, out: &mut Vec<usize>);

    /// Component `i` of f̄(q). Entries of `q` outside `stencil(i)` are not read.
    fn rhs_component(&self, q: &[T], i: usize) -> T;

    /// Nonzero entries `(column, value)` of row `i` of ∂f̄/∂q.
    fn jacobian_row(&self, q: &[T], i: usize, out: &mut Vec<(usize, T)>);

    fn rhs(&self, q: &[T], out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.rhs_component(q, i);
        }
    }

    fn jacobian(&self, q: &[T]) -> SparseMatrix<T> {
        let mut rows = Vec::with_capacity(self.dim());
        let mut buf = Vec::new();
        for i in 0..self.dim() {
            buf.clear();
            self.jacobian_row(q, i, &mut buf);
            rows.push(buf.clone());
        }
        SparseMatrix::from_rows(self.dim(), rows)
    }

    /// Solves `(I - shift · ∂f̄/∂q(q)) x = rhs`.
    ///
    /// The default assembles a dense matrix; structured models override it.
    fn solve_shifted(&self, q: &[T], shift: T, rhs: &[T]) -> Result<Vec<T>, LinalgError> {
        let n = self.dim();
        let jac = self.jacobian(q);
        let mut a = DMatrix::identity(n, n);
        for i in 0..n {
            for (c, v) in jac.row(i) {
                a[(i, c)] -= shift * v;
            }
        }
        let x = linalg::lu_solve(&a, &DVector::from_column_slice(rhs))?;
        Ok(x.as_slice().to_vec())
    }
}

/// Returns an error naming the first non-finite entry.
pub fn check_finite<T: Real>(q: &[T]) -> Result<(), ModelError> {
    match q.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(ModelError::NonFinite { index }),
        None => Ok(()),
    }
}

/// Evaluates f̄(q) after validating the input.
pub fn evaluate_rhs<T: Real, D: Dynamics<T> + ?Sized>(
    model: &D,
    q: &DVector<T>,
) -> Result<DVector<T>, ModelError> {
    check_finite(q.as_slice())?;
    let mut out = DVector::zeros(model.dim());
    model.rhs(q.as_slice(), out.as_mut_slice());
    Ok(out)
}

/// Uniform time grid `t_k = k · dt`, `k = 0..=num_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub dt: f64,
    pub num_steps: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            num_steps: 50_000,
        }
    }
}

impl TimeGrid {
    pub fn new(dt: f64, num_steps: usize) -> Result<Self, ModelError> {
        let grid = Self { dt, num_steps };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(ModelError::Invalid(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        Ok(())
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn final_time(&self) -> f64 {
        self.time(self.num_steps)
    }
}

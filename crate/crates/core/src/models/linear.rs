use nalgebra::DMatrix;

use super::Dynamics;
use crate::Real;

/// Linear dynamics `dq/dt = A q` with a dense operator.
#[derive(Debug, Clone)]
pub struct LinearModel<T: Real> {
    operator: DMatrix<T>,
    stencils: Vec<Vec<usize>>,
}

impl<T: Real> LinearModel<T> {
    pub fn new(operator: DMatrix<T>) -> Self {
        assert!(operator.is_square(), "linear model needs a square operator");
        let stencils = (0..operator.nrows())
            .map(|i| {
                (0..operator.ncols())
                    .filter(|&j| operator[(i, j)] != T::zero())
                    .collect()
            })
            .collect();
        Self { operator, stencils }
    }

    /// Scalar decay `dq/dt = -rate · q`.
    pub fn scalar_decay(rate: T) -> Self {
        Self::new(DMatrix::from_element(1, 1, -rate))
    }

    pub fn operator(&self) -> &DMatrix<T> {
        &self.operator
    }
}

impl<T: Real> Dynamics<T> for LinearModel<T> {
    fn dim(&self) -> usize {
        self.operator.nrows()
    }

    fn stencil(&self, i: usize, out: &mut Vec<usize>) {
        out.extend_from_slice(&self.stencils[i]);
    }

    fn rhs_component(&self, q: &[T], i: usize) -> T {
        self.stencils[i]
            .iter()
            .fold(T::zero(), |acc, &j| acc + self.operator[(i, j)] * q[j])
    }

    fn jacobian_row(&self, _q: &[T], i: usize, out: &mut Vec<(usize, T)>) {
        out.extend(self.stencils[i].iter().map(|&j| (j, self.operator[(i, j)])));
    }
}

/// Identity dynamics `dq/dt = 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroModel {
    dim: usize,
}

impl ZeroModel {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl<T: Real> Dynamics<T> for ZeroModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn stencil(&self, _i: usize, _out: &mut Vec<usize>) {}

    fn rhs_component(&self, _q: &[T], _i: usize) -> T {
        T::zero()
    }

    fn jacobian_row(&self, _q: &[T], _i: usize, _out: &mut Vec<(usize, T)>) {}

    fn solve_shifted(
        &self,
        _q: &[T],
        _shift: T,
        rhs: &[T],
    ) -> Result<Vec<T>, crate::linalg::LinalgError> {
        Ok(rhs.to_vec())
    }
}

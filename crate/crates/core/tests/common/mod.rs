#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};

use adeim_core::models::{Dynamics, Grid1D, RdeModel, RdeParams};
use adeim_core::rom::Basis;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_basis(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> Basis<f64> {
    Basis::orthonormalized(&random_matrix(rng, dim, n)).expect("random matrix has full rank")
}

pub fn rde(grid_points: usize) -> RdeModel<f64> {
    RdeModel::new(RdeParams::default(), Grid1D::new(grid_points).unwrap()).unwrap()
}

/// `‖(V + αβᵀ) C − F‖_F²` with `C = VᵀF`.
pub fn objective(v: &DMatrix<f64>, f: &DMatrix<f64>, alpha: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let c = v.tr_mul(f);
    ((v + alpha * beta.transpose()) * &c - f).norm_squared()
}

/// Best objective reached by alternating least squares over `α` and `β`
/// from `starts` random initial `β`.
pub fn als_best(v: &DMatrix<f64>, f: &DMatrix<f64>, starts: usize, sweeps: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let c = v.tr_mul(f);
    let e = f - v * &c;
    let mut best = e.norm_squared();
    let c_t_pinv = adeim_core::linalg::pinv(&c.transpose()).unwrap();
    for _ in 0..starts {
        let mut beta = DVector::from_fn(v.ncols(), |_, _| rng.gen_range(-1.0..1.0));
        let mut alpha = DVector::zeros(v.nrows());
        for _ in 0..sweeps {
            // α minimizes ‖E − α gᵀ‖ for g = Cᵀβ.
            let g = c.tr_mul(&beta);
            let gg = g.norm_squared();
            if gg == 0.0 {
                break;
            }
            alpha = &e * &g / gg;
            let aa = alpha.norm_squared();
            if aa == 0.0 {
                break;
            }
            // β minimizes ‖Eᵀα/‖α‖² − Cᵀβ‖.
            beta = &c_t_pinv * (e.tr_mul(&alpha) / aa);
        }
        best = best.min(objective(v, f, &alpha, &beta));
    }
    best
}

/// Wraps a model and counts component evaluations.
pub struct Counting<D> {
    pub inner: D,
    calls: AtomicUsize,
}

impl<D> Counting<D> {
    pub fn new(inner: D) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }
}

impl<D: Dynamics<f64>> Dynamics<f64> for Counting<D> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn stencil(&self, i: usize, out: &mut Vec<usize>) {
        self.inner.stencil(i, out)
    }

    fn rhs_component(&self, q: &[f64], i: usize) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.rhs_component(q, i)
    }

    fn jacobian_row(&self, q: &[f64], i: usize, out: &mut Vec<(usize, f64)>) {
        self.inner.jacobian_row(q, i, out)
    }
}

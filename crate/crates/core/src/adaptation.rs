//! Online basis adaptation: the data window, the rank-1 basis update fitted
//! over all components of the window, lookback data samples, and residual-based
//! sampling-point selection.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{self, LinalgError};
use crate::models::{check_finite, Dynamics, ModelError};
use crate::rom::{Basis, IndexSelection, Interpolator, RomError};
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdaptError {
    #[error("window index {k} does not follow the latest index {last}")]
    NonMonotoneIndex { k: usize, last: usize },
    #[error("window capacity must be at least 1")]
    ZeroCapacity,
    #[error("empty data window")]
    EmptyWindow,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("adapted basis lost rank: {0}")]
    RankCollapse(LinalgError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Rom(#[from] RomError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The `w` most recent data samples, tagged with their time index.
#[derive(Debug, Clone)]
pub struct DataWindow<T: Real> {
    capacity: usize,
    columns: VecDeque<(usize, DVector<T>)>,
}

impl<T: Real> DataWindow<T> {
    pub fn new(capacity: usize) -> Result<Self, AdaptError> {
        if capacity == 0 {
            return Err(AdaptError::ZeroCapacity);
        }
        Ok(Self {
            capacity,
            columns: VecDeque::with_capacity(capacity + 1),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn latest_index(&self) -> Option<usize> {
        self.columns.back().map(|(k, _)| *k)
    }

    pub fn time_indices(&self) -> Vec<usize> {
        self.columns.iter().map(|(k, _)| *k).collect()
    }

    /// Stores `sample` under time index `k`, evicting the oldest column when full.
    pub fn push(&mut self, k: usize, sample: DVector<T>) -> Result<(), AdaptError> {
        if let Some(last) = self.latest_index() {
            if k <= last {
                return Err(AdaptError::NonMonotoneIndex { k, last });
            }
        }
        if let Some((_, first)) = self.columns.front() {
            if first.len() != sample.len() {
                return Err(AdaptError::Dimension(format!(
                    "sample of length {} in a window of length {}",
                    sample.len(),
                    first.len()
                )));
            }
        }
        self.columns.push_back((k, sample));
        while self.columns.len() > self.capacity {
            self.columns.pop_front();
        }
        Ok(())
    }

    /// Stored samples with time index in `first..=last`, in time order.
    pub fn slice(&self, first: usize, last: usize) -> Vec<(usize, &DVector<T>)> {
        self.columns
            .iter()
            .filter(|(k, _)| (first..=last).contains(k))
            .map(|(k, v)| (*k, v))
            .collect()
    }

    /// The window `F_k = [q̂_{k−w+1}, …, q̂_k]` as a matrix, restricted to the
    /// samples that exist, together with their time indices.
    pub fn matrix_ending_at(&self, k: usize) -> Result<(DMatrix<T>, Vec<usize>), AdaptError> {
        let first = (k + 1).saturating_sub(self.capacity);
        let cols = self.slice(first, k);
        if cols.is_empty() {
            return Err(AdaptError::EmptyWindow);
        }
        let indices = cols.iter().map(|(k, _)| *k).collect();
        let columns: Vec<DVector<T>> = cols.into_iter().map(|(_, v)| v.clone()).collect();
        Ok((DMatrix::from_columns(&columns), indices))
    }
}

/// Rank-1 basis update `V + αβᵀ` and the window objective before/after.
#[derive(Debug, Clone)]
pub struct Rank1Update<T: Real> {
    pub alpha: DVector<T>,
    pub beta: DVector<T>,
    /// `‖V C − F‖_F²`, the objective at `α = 0`.
    pub objective_before: T,
    /// `‖(V + αβᵀ) C − F‖_F²`.
    pub objective_after: T,
    /// Set when the coefficient matrix `C = VᵀF` vanishes and no update is possible.
    pub degenerate: bool,
}

impl<T: Real> Rank1Update<T> {
    fn zero(n_full: usize, n: usize, objective: T, degenerate: bool) -> Self {
        Self {
            alpha: DVector::zeros(n_full),
            beta: DVector::zeros(n),
            objective_before: objective,
            objective_after: objective,
            degenerate,
        }
    }
}

/// Global minimizer of `‖(V + αβᵀ) C − F‖_F²` with `C = VᵀF`.
///
/// The product `αβᵀC` ranges over rank-1 matrices whose rows lie in the row
/// space of `C`, so the optimum is the dominant singular triple of the
/// residual `E = F − VC` projected onto that row space: with
/// `EΠ ≈ σ u vᵀ`, `Π = C†C`, take `α = σu` and `β = (Cᵀ)† v`.
pub fn rank1_update<T: Real>(basis: &Basis<T>, window: &DMatrix<T>) -> Result<Rank1Update<T>, AdaptError> {
    let v = basis.matrix();
    if window.nrows() != basis.dim() {
        return Err(AdaptError::Dimension(format!(
            "window has {} rows, basis has {}",
            window.nrows(),
            basis.dim()
        )));
    }
    if window.ncols() == 0 {
        return Err(AdaptError::EmptyWindow);
    }
    let coeffs = v.tr_mul(window);
    let residual = window - v * &coeffs;
    let objective_before = residual.norm_squared();
    let c_norm = coeffs.norm();
    if c_norm == T::zero() || c_norm <= T::default_epsilon() * window.norm() {
        return Ok(Rank1Update::zero(basis.dim(), basis.rank(), objective_before, true));
    }
    let c_pinv = linalg::pinv(&coeffs)?;
    let row_projector = &c_pinv * &coeffs;
    let projected = &residual * row_projector;
    let svd = linalg::thin_svd(&projected)?;
    let sigma = svd.singular_values[0];
    if sigma == T::zero() {
        return Ok(Rank1Update::zero(basis.dim(), basis.rank(), objective_before, false));
    }
    let alpha = svd.u.column(0) * sigma;
    let right = svd.v_t.row(0).transpose();
    // (Cᵀ)† = (C†)ᵀ
    let beta = c_pinv.tr_mul(&right);
    let fitted = &alpha * (coeffs.tr_mul(&beta)).transpose();
    let objective_after = (&residual - fitted).norm_squared();
    Ok(Rank1Update {
        alpha,
        beta,
        objective_before,
        objective_after,
        degenerate: false,
    })
}

/// Orthonormalized `V + αβᵀ`.
pub fn adapt_basis<T: Real>(basis: &Basis<T>, update: &Rank1Update<T>) -> Result<Basis<T>, AdaptError> {
    if update.alpha.len() != basis.dim() || update.beta.len() != basis.rank() {
        return Err(AdaptError::Dimension(format!(
            "update shapes ({}, {}) for a {}x{} basis",
            update.alpha.len(),
            update.beta.len(),
            basis.dim(),
            basis.rank()
        )));
    }
    let w = basis.matrix() + &update.alpha * update.beta.transpose();
    let q = linalg::orthonormalize_gram_schmidt(&w).map_err(AdaptError::RankCollapse)?;
    Ok(Basis::from_orthonormal(q)?)
}

/// Lookback data sample built from `f(V q̃) = V q̃ − dt·f̄(V q̃)`.
///
/// The entries at the sampling points are the exact values of `f`; the
/// remaining entries are the empirical-interpolation lift of those values.
pub fn lookback_sample<T: Real, D: Dynamics<T> + ?Sized>(
    model: &D,
    basis: &Basis<T>,
    sampling: &IndexSelection,
    reduced: &DVector<T>,
    dt: T,
) -> Result<DVector<T>, AdaptError> {
    let interp = Interpolator::new(basis, sampling)?;
    let lifted = basis.lift(reduced);
    check_finite(lifted.as_slice())?;
    let sampled = DVector::from_iterator(
        sampling.len(),
        sampling
            .as_slice()
            .iter()
            .map(|&i| lifted[i] - dt * model.rhs_component(lifted.as_slice(), i)),
    );
    let mut sample = basis.lift(&interp.coefficients(&sampled));
    for (&i, v) in sampling.as_slice().iter().zip(sampled.iter()) {
        sample[i] = *v;
    }
    Ok(sample)
}

/// Indices of the `m_s` largest row norms of `R = F − V (V[p,:])† F[p,:]`,
/// in descending order; equal norms are ordered by lower index first.
pub fn update_sampling_points<T: Real>(
    window: &DMatrix<T>,
    basis: &Basis<T>,
    points: &IndexSelection,
    m_s: usize,
) -> Result<IndexSelection, AdaptError> {
    if window.ncols() == 0 {
        return Err(AdaptError::EmptyWindow);
    }
    if m_s > basis.dim() {
        return Err(AdaptError::Dimension(format!(
            "{m_s} sampling points requested in dimension {}",
            basis.dim()
        )));
    }
    let interp = Interpolator::new(basis, points)?;
    let sampled = window.select_rows(points.as_slice());
    let residual = window - basis.matrix() * (interp.pseudo_inverse() * sampled);
    let norms: Vec<T> = residual.row_iter().map(|r| r.norm_squared()).collect();
    let mut order: Vec<usize> = (0..basis.dim()).collect();
    order.sort_by(|&a, &b| {
        norms[b]
            .partial_cmp(&norms[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(m_s);
    Ok(IndexSelection::new(order, basis.dim())?)
}

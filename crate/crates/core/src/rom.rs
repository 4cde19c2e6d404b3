//! Static reduction building blocks: POD bases, QDEIM interpolation points,
//! empirical-interpolation lifts and the reduced implicit time step.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{self, LinalgError};
use crate::models::{Dynamics, ModelError, NewtonOptions};
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RomError {
    #[error("requested dimension {requested} exceeds the numerical rank {achievable} of the snapshots")]
    RankTooLow { requested: usize, achievable: usize },
    #[error("{points} points cannot determine {dim} basis coefficients")]
    TooFewPoints { points: usize, dim: usize },
    #[error("reduced Newton iteration diverged; residual history {history:?}")]
    NewtonDiverged { history: Vec<f64> },
    #[error("invalid index selection: {0}")]
    Selection(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Column-orthonormal `N × n` basis matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis<T: Real> {
    matrix: DMatrix<T>,
}

impl<T: Real> Basis<T> {
    /// Wraps a matrix that must already have orthonormal columns.
    pub fn from_orthonormal(matrix: DMatrix<T>) -> Result<Self, RomError> {
        let basis = Self { matrix };
        let (rows, cols) = basis.matrix.shape();
        if cols == 0 || cols > rows {
            return Err(RomError::Dimension(format!("basis shape {rows}x{cols}")));
        }
        let tol = T::lit(1e-10).max(T::default_epsilon() * T::lit(1e3));
        let defect = basis.orthonormality_defect();
        if defect > tol {
            return Err(RomError::Dimension(format!(
                "columns are not orthonormal (defect {defect:e})"
            )));
        }
        Ok(basis)
    }

    /// Orthonormal, sign-fixed basis for the column space of `w`.
    pub fn orthonormalized(w: &DMatrix<T>) -> Result<Self, RomError> {
        Ok(Self {
            matrix: linalg::orthonormalize(w)?,
        })
    }

    /// The first `n` canonical unit vectors of `R^dim`.
    pub fn canonical(dim: usize, n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, n),
        }
    }

    /// Full dimension `N`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Reduced dimension `n`.
    pub fn rank(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.matrix
    }

    /// `‖VᵀV − I‖_F`.
    pub fn orthonormality_defect(&self) -> T {
        let n = self.rank();
        (self.matrix.transpose() * &self.matrix - DMatrix::identity(n, n)).norm()
    }

    /// Rows of `V` at `indices`, stacked in order.
    pub fn rows(&self, indices: &[usize]) -> DMatrix<T> {
        self.matrix.select_rows(indices)
    }

    pub fn lift(&self, coefficients: &DVector<T>) -> DVector<T> {
        &self.matrix * coefficients
    }

    pub fn project(&self, x: &DVector<T>) -> DVector<T> {
        self.matrix.tr_mul(x)
    }
}

/// Ordered set of pairwise-distinct component indices in `[0, universe)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSelection {
    indices: Vec<usize>,
    universe: usize,
}

impl IndexSelection {
    pub fn new(indices: Vec<usize>, universe: usize) -> Result<Self, RomError> {
        let mut seen = vec![false; universe];
        for &i in &indices {
            if i >= universe {
                return Err(RomError::Selection(format!(
                    "index {i} out of range for dimension {universe}"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(RomError::Selection(format!("duplicate index {i}")));
            }
        }
        Ok(Self { indices, universe })
    }

    /// Every index `0..universe`, in order.
    pub fn all(universe: usize) -> Self {
        Self {
            indices: (0..universe).collect(),
            universe,
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn contains_all(&self) -> bool {
        self.indices.len() == self.universe
    }

    /// Indices not selected, ascending.
    pub fn complement(&self) -> Vec<usize> {
        let mut mask = vec![true; self.universe];
        for &i in &self.indices {
            mask[i] = false;
        }
        (0..self.universe).filter(|&i| mask[i]).collect()
    }

    /// Entries of `x` at the selected indices.
    pub fn gather<T: Real>(&self, x: &DVector<T>) -> DVector<T> {
        DVector::from_iterator(self.len(), self.indices.iter().map(|&i| x[i]))
    }
}

/// Dominant `n` left singular vectors of the snapshot matrix.
pub fn pod<T: Real>(snapshots: &DMatrix<T>, n: usize) -> Result<Basis<T>, RomError> {
    let (rows, cols) = snapshots.shape();
    if n == 0 || rows == 0 || cols == 0 {
        return Err(RomError::RankTooLow {
            requested: n,
            achievable: 0,
        });
    }
    // Tall snapshot matrices are reduced to their triangular factor first.
    let (left, svd) = if rows > 2 * cols {
        let qr = snapshots.clone().qr();
        let svd = linalg::thin_svd(&qr.r())?;
        (Some(qr.q()), svd)
    } else {
        (None, linalg::thin_svd(snapshots)?)
    };
    let cutoff = T::rank_rtol() * svd.singular_values[0];
    let achievable = svd
        .singular_values
        .iter()
        .filter(|&&s| s > cutoff && s > T::zero())
        .count();
    if n > achievable {
        return Err(RomError::RankTooLow {
            requested: n,
            achievable,
        });
    }
    let u = svd.u.columns(0, n).into_owned();
    let mut v = match left {
        Some(q) => q * u,
        None => u,
    };
    linalg::fix_column_signs(&mut v);
    Ok(Basis { matrix: v })
}

/// POD basis of dimension `n`, padded with orthonormal complement directions
/// when `n` exceeds the numerical rank of the snapshots.
///
/// The padding is built by orthogonalizing canonical unit vectors in index
/// order against the columns collected so far.
pub fn pod_completed<T: Real>(snapshots: &DMatrix<T>, n: usize) -> Result<Basis<T>, RomError> {
    let rows = snapshots.nrows();
    if n > rows {
        return Err(RomError::RankTooLow {
            requested: n,
            achievable: rows,
        });
    }
    let achievable = match pod(snapshots, n) {
        Ok(basis) => return Ok(basis),
        Err(RomError::RankTooLow { achievable, .. }) if achievable > 0 => achievable,
        Err(e) => return Err(e),
    };
    let mut columns: Vec<DVector<T>> = pod(snapshots, achievable)?
        .matrix
        .column_iter()
        .map(|c| c.into_owned())
        .collect();
    let keep = T::lit(0.5);
    for i in 0..rows {
        if columns.len() == n {
            break;
        }
        let mut e = DVector::zeros(rows);
        e[i] = T::one();
        for _ in 0..2 {
            for c in &columns {
                let d = c.dot(&e);
                e.axpy(-d, c, T::one());
            }
        }
        let norm = e.norm();
        if norm > keep {
            columns.push(e / norm);
        }
    }
    Ok(Basis {
        matrix: DMatrix::from_columns(&columns),
    })
}

/// Singular values of the snapshot matrix, descending.
pub fn singular_values<T: Real>(snapshots: &DMatrix<T>) -> Result<DVector<T>, RomError> {
    Ok(linalg::thin_svd(snapshots)?.singular_values)
}

/// QDEIM: the first `n` pivots of a column-pivoted QR of `Vᵀ`.
pub fn qdeim_points<T: Real>(basis: &Basis<T>) -> Result<IndexSelection, RomError> {
    let n = basis.rank();
    let pivots = linalg::pivoted_qr_pivots(&basis.matrix.transpose(), n)?;
    IndexSelection::new(pivots, basis.dim())
}

/// QDEIM points extended to `m ≥ n` points by descending leverage (row norm
/// of `V`) among the remaining indices, ties to the lower index.
pub fn qdeim_points_oversampled<T: Real>(
    basis: &Basis<T>,
    m: usize,
) -> Result<IndexSelection, RomError> {
    let base = qdeim_points(basis)?;
    if m <= base.len() {
        return Ok(base);
    }
    if m > basis.dim() {
        return Err(RomError::Selection(format!(
            "cannot select {m} points in dimension {}",
            basis.dim()
        )));
    }
    let mut chosen = vec![false; basis.dim()];
    for &i in base.as_slice() {
        chosen[i] = true;
    }
    let mut rest: Vec<(usize, T)> = (0..basis.dim())
        .filter(|&i| !chosen[i])
        .map(|i| (i, basis.matrix.row(i).norm_squared()))
        .collect();
    rest.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    let mut indices = base.indices;
    indices.extend(rest.iter().take(m - indices.len()).map(|&(i, _)| i));
    IndexSelection::new(indices, basis.dim())
}

/// Smallest fraction of a Newton step tried by the reduced solver's line search.
const MIN_NEWTON_SCALE: f64 = 1.0 / 256.0;

/// Empirical-interpolation operator `(V[p,:])†` for a fixed basis and point set.
#[derive(Debug, Clone)]
pub struct Interpolator<T: Real> {
    pseudo_inverse: DMatrix<T>,
}

impl<T: Real> Interpolator<T> {
    pub fn new(basis: &Basis<T>, points: &IndexSelection) -> Result<Self, RomError> {
        if points.len() < basis.rank() {
            return Err(RomError::TooFewPoints {
                points: points.len(),
                dim: basis.rank(),
            });
        }
        if points.universe() != basis.dim() {
            return Err(RomError::Dimension(format!(
                "selection over {} components for a basis of dimension {}",
                points.universe(),
                basis.dim()
            )));
        }
        let rows = basis.rows(points.as_slice());
        Ok(Self {
            pseudo_inverse: linalg::pinv(&rows)?,
        })
    }

    /// Least-squares coefficients `(V[p,:])† · sampled`.
    pub fn coefficients(&self, sampled: &DVector<T>) -> DVector<T> {
        &self.pseudo_inverse * sampled
    }

    pub fn pseudo_inverse(&self) -> &DMatrix<T> {
        &self.pseudo_inverse
    }
}

/// Lifts sampled values to the full space: `V (V[p,:])† sampled`.
pub fn eim_reconstruct<T: Real>(
    basis: &Basis<T>,
    points: &IndexSelection,
    sampled: &DVector<T>,
) -> Result<DVector<T>, RomError> {
    if sampled.len() != points.len() {
        return Err(RomError::Dimension(format!(
            "{} sampled values for {} points",
            sampled.len(),
            points.len()
        )));
    }
    let interp = Interpolator::new(basis, points)?;
    Ok(basis.lift(&interp.coefficients(sampled)))
}

#[derive(Debug, Clone)]
pub struct ReducedStepReport<T: Real> {
    pub state: DVector<T>,
    pub iterations: usize,
    pub residual: T,
}

/// Reduced implicit step for one `(V, p)` pair.
///
/// Solves `(V[p,:])† · P^T f(V q̃) = q̃_prev` with `f(q) = q − dt·f̄(q)` by
/// Newton's method. Only the `m` selected components of f̄ are evaluated, on
/// lifted entries restricted to the union of their stencils.
pub struct ReducedStepper<T: Real> {
    points: Vec<usize>,
    /// Sorted union of the stencils of all points (and the points themselves).
    support: Vec<usize>,
    v_support: DMatrix<T>,
    v_points: DMatrix<T>,
    pseudo_inverse: DMatrix<T>,
    scratch: Vec<T>,
}

impl<T: Real> ReducedStepper<T> {
    pub fn new<D: Dynamics<T> + ?Sized>(
        model: &D,
        basis: &Basis<T>,
        points: &IndexSelection,
    ) -> Result<Self, RomError> {
        if basis.dim() != model.dim() {
            return Err(RomError::Dimension(format!(
                "basis dimension {} but model dimension {}",
                basis.dim(),
                model.dim()
            )));
        }
        let interp = Interpolator::new(basis, points)?;
        let mut support = Vec::with_capacity(points.len() * 5);
        for &p in points.as_slice() {
            support.push(p);
            model.stencil(p, &mut support);
        }
        support.sort_unstable();
        support.dedup();
        Ok(Self {
            points: points.as_slice().to_vec(),
            v_support: basis.rows(&support),
            support,
            v_points: basis.rows(points.as_slice()),
            pseudo_inverse: interp.pseudo_inverse,
            scratch: vec![T::zero(); model.dim()],
        })
    }

    fn scatter_lift(&mut self, coefficients: &DVector<T>) {
        let lifted = &self.v_support * coefficients;
        for (&i, v) in self.support.iter().zip(lifted.iter()) {
            self.scratch[i] = *v;
        }
    }

    /// `(V[p,:])† · P^T f(V q) − q_prev`; leaves the lift of `q` in the scratch buffer.
    fn residual<D: Dynamics<T> + ?Sized>(
        &mut self,
        model: &D,
        q: &DVector<T>,
        q_prev: &DVector<T>,
        dt: T,
    ) -> DVector<T> {
        self.scatter_lift(q);
        let f_points = DVector::from_iterator(
            self.points.len(),
            self.points.iter().map(|&p| model.rhs_component(&self.scratch, p)),
        );
        let sampled = &self.v_points * q - f_points * dt;
        &self.pseudo_inverse * sampled - q_prev
    }

    /// Newton's method seeded at `q_prev`, with step halving whenever a full
    /// step does not reduce the residual norm.
    pub fn step<D: Dynamics<T> + ?Sized>(
        &mut self,
        model: &D,
        q_prev: &DVector<T>,
        dt: T,
        opts: &NewtonOptions,
    ) -> Result<ReducedStepReport<T>, RomError> {
        let n = self.v_points.ncols();
        let m = self.points.len();
        if q_prev.len() != n {
            return Err(RomError::Dimension(format!(
                "reduced state has length {}, basis has {n} columns",
                q_prev.len()
            )));
        }
        crate::models::check_finite(q_prev.as_slice())?;
        let tol = T::lit(opts.tol);
        let mut q = q_prev.clone();
        let mut g = self.residual(model, &q, q_prev, dt);
        let mut residual = g.norm();
        let mut history = Vec::new();
        let mut row = Vec::with_capacity(8);
        for it in 0..=opts.max_iter {
            history.push(residual.as_f64());
            if residual <= tol {
                return Ok(ReducedStepReport {
                    state: q,
                    iterations: it,
                    residual,
                });
            }
            if it == opts.max_iter || !residual.is_finite() {
                break;
            }
            // Rows of ∂f̄/∂q at the points, multiplied into the basis. The
            // scratch buffer still holds the lift of the current iterate.
            let mut jv = DMatrix::zeros(m, n);
            for (r, &p) in self.points.iter().enumerate() {
                row.clear();
                model.jacobian_row(&self.scratch, p, &mut row);
                for &(c, v) in &row {
                    let pos = self
                        .support
                        .binary_search(&c)
                        .expect("jacobian entry outside declared stencil");
                    for j in 0..n {
                        jv[(r, j)] += v * self.v_support[(pos, j)];
                    }
                }
            }
            let reduced_jac = &self.pseudo_inverse * (&self.v_points - jv * dt);
            let delta = linalg::lu_solve(&reduced_jac, &(-&g))?;
            let mut scale = T::one();
            let half = T::lit(0.5);
            loop {
                let trial = &q + &delta * scale;
                let g_trial = self.residual(model, &trial, q_prev, dt);
                let r_trial = g_trial.norm();
                if r_trial < residual || scale <= T::lit(MIN_NEWTON_SCALE) {
                    q = trial;
                    g = g_trial;
                    residual = r_trial;
                    break;
                }
                scale *= half;
            }
        }
        Err(RomError::NewtonDiverged { history })
    }
}

/// One reduced implicit-Euler step from `q_prev` with basis `V` and points `p`.
pub fn rom_step<T: Real, D: Dynamics<T> + ?Sized>(
    q_prev: &DVector<T>,
    basis: &Basis<T>,
    points: &IndexSelection,
    model: &D,
    dt: T,
    opts: &NewtonOptions,
) -> Result<ReducedStepReport<T>, RomError> {
    ReducedStepper::new(model, basis, points)?.step(model, q_prev, dt, opts)
}

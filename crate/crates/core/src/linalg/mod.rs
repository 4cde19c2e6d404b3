//! Dense and banded linear-algebra helpers used by the reduction machinery.

mod banded;
mod sparse;

pub use banded::{BandLu, BandMatrix, CyclicBandSolver};
pub use sparse::SparseMatrix;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is numerically singular (pivot {pivot} of size {magnitude:e})")]
    Singular { pivot: usize, magnitude: f64 },
    #[error("matrix has numerical rank {rank}, expected at least {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular value decomposition did not converge")]
    SvdFailed,
}

/// Singular values, descending, together with the thin factors.
pub struct ThinSvd<T: Real> {
    pub u: DMatrix<T>,
    pub singular_values: DVector<T>,
    pub v_t: DMatrix<T>,
}

/// Thin SVD with singular values sorted in descending order.
///
/// Computed in double precision by faer: nalgebra's SVD with singular
/// vectors returns wrong factors for some rank-deficient inputs, which is the
/// normal case for the projected residuals in the basis update.
pub fn thin_svd<T: Real>(a: &DMatrix<T>) -> Result<ThinSvd<T>, LinalgError> {
    let (rows, cols) = a.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(ThinSvd {
            u: DMatrix::zeros(rows, 0),
            singular_values: DVector::zeros(0),
            v_t: DMatrix::zeros(0, cols),
        });
    }
    let m = faer::Mat::<f64>::from_fn(rows, cols, |i, j| a[(i, j)].as_f64());
    let svd = m.thin_svd().map_err(|_| LinalgError::SvdFailed)?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| s[y].total_cmp(&s[x]));
    Ok(ThinSvd {
        u: DMatrix::from_fn(rows, k, |i, j| T::lit(u[(i, order[j])])),
        singular_values: DVector::from_fn(k, |j, _| T::lit(s[order[j]])),
        v_t: DMatrix::from_fn(k, cols, |i, j| T::lit(v[(j, order[i])])),
    })
}

/// Moore-Penrose pseudo-inverse with the relative cutoff `rtol * sigma_max`.
pub fn pinv_with_rtol<T: Real>(a: &DMatrix<T>, rtol: T) -> Result<DMatrix<T>, LinalgError> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Ok(DMatrix::zeros(cols, rows));
    }
    let svd = thin_svd(a)?;
    let sigma_max = svd.singular_values[0];
    let cutoff = rtol * sigma_max;
    let k = svd.singular_values.len();
    let mut result = DMatrix::zeros(cols, rows);
    for i in 0..k {
        let s = svd.singular_values[i];
        if s <= cutoff || s == T::zero() {
            break;
        }
        let inv = T::one() / s;
        // result += v_i * inv * u_i^T
        let vi = svd.v_t.row(i).transpose();
        let ui = svd.u.column(i);
        result.ger(inv, &vi, &ui, T::one());
    }
    Ok(result)
}

/// Pseudo-inverse with the crate-wide default cutoff of `1e-12 * sigma_max`.
pub fn pinv<T: Real>(a: &DMatrix<T>) -> Result<DMatrix<T>, LinalgError> {
    pinv_with_rtol(a, T::rank_rtol())
}

/// Numerical rank under the cutoff `rtol * sigma_max`.
pub fn numerical_rank<T: Real>(a: &DMatrix<T>, rtol: T) -> Result<usize, LinalgError> {
    if a.is_empty() {
        return Ok(0);
    }
    let svd = thin_svd(a)?;
    let cutoff = rtol * svd.singular_values[0];
    Ok(svd
        .singular_values
        .iter()
        .filter(|&&s| s > cutoff && s > T::zero())
        .count())
}

/// Flips column signs so that the first entry of significant magnitude is positive.
pub fn fix_column_signs<T: Real>(m: &mut DMatrix<T>) {
    for mut col in m.column_iter_mut() {
        let scale = col.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
        if scale == T::zero() {
            continue;
        }
        let threshold = scale * T::lit(1e-8);
        if let Some(first) = col.iter().find(|x| x.abs() > threshold) {
            if *first < T::zero() {
                col.neg_mut();
            }
        }
    }
}

/// Orthonormal basis of the column space of a full-column-rank matrix (thin QR, sign-fixed).
pub fn orthonormalize<T: Real>(w: &DMatrix<T>) -> Result<DMatrix<T>, LinalgError> {
    let mut q = orthonormalize_gram_schmidt(w)?;
    fix_column_signs(&mut q);
    Ok(q)
}

/// Orthonormal factor `Q` of `W = QR` with a positive diagonal in `R`.
///
/// This is the factor Gram–Schmidt produces: column `j` of `Q` depends only on
/// the first `j` columns of `W`, and `Q ≈ W` when `W` is nearly orthonormal.
pub fn orthonormalize_gram_schmidt<T: Real>(w: &DMatrix<T>) -> Result<DMatrix<T>, LinalgError> {
    let (rows, cols) = w.shape();
    if cols > rows {
        return Err(LinalgError::RankDeficient {
            rank: rows,
            expected: cols,
        });
    }
    let qr = w.clone().qr();
    let r = qr.r();
    let scale = w.norm();
    let tol = T::rank_rtol() * scale;
    for i in 0..cols {
        if r[(i, i)].abs() <= tol {
            let rank = (0..cols).filter(|&j| r[(j, j)].abs() > tol).count();
            return Err(LinalgError::RankDeficient {
                rank,
                expected: cols,
            });
        }
    }
    let mut q = qr.q();
    for j in 0..cols {
        if r[(j, j)] < T::zero() {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// First `count` pivot columns of a Householder QR with column pivoting.
///
/// Ties in the column-norm maximum go to the lowest column index. Fails when
/// the remaining columns are numerically zero before `count` pivots are found.
pub fn pivoted_qr_pivots<T: Real>(a: &DMatrix<T>, count: usize) -> Result<Vec<usize>, LinalgError> {
    let (rows, cols) = a.shape();
    if count > rows.min(cols) {
        return Err(LinalgError::DimensionMismatch(format!(
            "cannot select {count} pivots from a {rows}x{cols} matrix"
        )));
    }
    let mut work = a.clone();
    let mut perm: Vec<usize> = (0..cols).collect();
    let initial_scale = (0..cols)
        .map(|c| work.column(c).norm())
        .fold(T::zero(), |acc, x| acc.max(x));
    let tol = T::rank_rtol() * initial_scale;

    for j in 0..count {
        let mut best = j;
        let mut best_norm = T::zero();
        for c in j..cols {
            let norm_sq = work.view((j, c), (rows - j, 1)).norm_squared();
            if norm_sq > best_norm {
                best_norm = norm_sq;
                best = c;
            }
        }
        let best_norm = best_norm.sqrt();
        if best_norm <= tol || best_norm == T::zero() {
            return Err(LinalgError::Singular {
                pivot: j,
                magnitude: best_norm.as_f64(),
            });
        }
        if best != j {
            work.swap_columns(j, best);
            perm.swap(j, best);
        }
        // Householder reflector annihilating work[j+1.., j].
        let x0 = work[(j, j)];
        let alpha = if x0 >= T::zero() { -best_norm } else { best_norm };
        let mut v: DVector<T> = work.view((j, j), (rows - j, 1)).column(0).into_owned();
        v[0] -= alpha;
        let v_norm_sq = v.norm_squared();
        if v_norm_sq > T::zero() {
            let two = T::lit(2.0);
            for c in j..cols {
                let mut col = work.view_mut((j, c), (rows - j, 1));
                let dot = v.dot(&col.column(0));
                let factor = two * dot / v_norm_sq;
                col.column_mut(0).axpy(-factor, &v, T::one());
            }
        }
    }
    perm.truncate(count);
    Ok(perm)
}

/// Solves a small dense square system with partial-pivoting LU.
pub fn lu_solve<T: Real>(a: &DMatrix<T>, b: &DVector<T>) -> Result<DVector<T>, LinalgError> {
    if !a.is_square() || a.nrows() != b.len() {
        return Err(LinalgError::DimensionMismatch(format!(
            "system {}x{} with right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    a.clone()
        .lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or(LinalgError::Singular {
            pivot: 0,
            magnitude: 0.0,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn svd_of_rank_deficient_matrices_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for cols in 2..8 {
            for rank in 1..cols {
                for _ in 0..50 {
                    let a = random_matrix(&mut rng, 17, rank) * random_matrix(&mut rng, rank, cols);
                    let svd = thin_svd(&a).unwrap();
                    let u_defect = (svd.u.tr_mul(&svd.u) - DMatrix::identity(cols, cols)).norm();
                    assert!(u_defect < 1e-12);
                    let gram_top = (a.tr_mul(&a)).symmetric_eigen().eigenvalues.max();
                    assert_relative_eq!(svd.singular_values[0].powi(2), gram_top, max_relative = 1e-10);
                    let rebuilt = &svd.u * DMatrix::from_diagonal(&svd.singular_values) * &svd.v_t;
                    assert!((rebuilt - &a).norm() < 1e-12 * (1.0 + a.norm()));
                }
            }
        }
    }

    #[test]
    fn pinv_satisfies_penrose_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(&mut rng, 9, 4);
        let p = pinv(&a).unwrap();
        assert_relative_eq!(&a * &p * &a, a.clone(), epsilon = 1e-12);
        assert_relative_eq!(&p * &a * &p, p.clone(), epsilon = 1e-12);
        let ap = &a * &p;
        assert_relative_eq!(ap.clone(), ap.transpose(), epsilon = 1e-12);
    }

    #[test]
    fn pinv_cuts_off_rank_deficient_directions() {
        let u = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let v = DVector::from_vec(vec![1.0, -1.0]);
        let a = &u * v.transpose();
        let p = pinv(&a).unwrap();
        assert_relative_eq!(&a * &p * &a, a.clone(), epsilon = 1e-12);
        assert_eq!(numerical_rank(&a, 1e-12).unwrap(), 1);
    }

    #[test]
    fn orthonormalize_keeps_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_matrix(&mut rng, 12, 3);
        let q = orthonormalize(&w).unwrap();
        assert_relative_eq!(q.transpose() * &q, DMatrix::identity(3, 3), epsilon = 1e-12);
        let proj = &q * q.transpose();
        assert_relative_eq!(&proj * &w, w.clone(), epsilon = 1e-12);
        for col in q.column_iter() {
            let first = col.iter().find(|x| x.abs() > 1e-8).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn orthonormalize_rejects_rank_collapse() {
        let mut w = DMatrix::<f64>::zeros(5, 2);
        w[(0, 0)] = 1.0;
        w[(0, 1)] = 2.0;
        assert!(matches!(
            orthonormalize(&w),
            Err(LinalgError::RankDeficient { .. })
        ));
    }

    #[test]
    fn pivoted_qr_first_pivot_is_largest_column() {
        let a = DMatrix::from_row_slice(2, 4, &[0.1, 3.0, 0.0, 1.0, 0.2, 0.0, 0.5, 1.0]);
        let piv = pivoted_qr_pivots(&a, 2).unwrap();
        assert_eq!(piv[0], 1);
        // After removing the e_1 direction, column 2 and 3 both have residual 0.5 / 1.0.
        assert_eq!(piv[1], 3);
    }

    #[test]
    fn pivoted_qr_reports_singularity() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert!(matches!(
            pivoted_qr_pivots(&a, 2),
            Err(LinalgError::Singular { pivot: 1, .. })
        ));
    }

    #[test]
    fn lu_solve_matches_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 6, 6) + DMatrix::identity(6, 6) * 3.0;
        let x = DVector::from_fn(6, |i, _| i as f64 - 2.0);
        let b = &a * &x;
        assert_relative_eq!(lu_solve(&a, &b).unwrap(), x, epsilon = 1e-12);
    }
}

use nalgebra::{DMatrix, DVector};

use super::LinalgError;
use crate::Real;

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Each row stores the window of columns `[i - kl, i + ku + kl]`; the extra
/// `kl` slots on the right receive fill-in from partial pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![T::zero(); n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    /// Whether `(i, j)` lies inside the declared band.
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if j + self.kl < i || j > i + self.ku + self.kl {
            T::zero()
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Adds `value` at `(i, j)`; panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, value: T) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let s = self.slot(i, j);
        self.data[s] += value;
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        DMatrix::from_fn(self.n, self.n, |i, j| {
            if self.in_band(i, j) {
                self.get(i, j)
            } else {
                T::zero()
            }
        })
    }

    /// LU factorization with partial pivoting, consuming the matrix.
    pub fn factor(mut self) -> Result<BandLu<T>, LinalgError> {
        let n = self.n;
        let kl = self.kl;
        let reach = self.ku + self.kl;
        let mut pivots = Vec::with_capacity(n);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for r in k + 1..=last_row {
                let v = self.get(r, k).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(LinalgError::Singular {
                    pivot: k,
                    magnitude: best.as_f64(),
                });
            }
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.slot(k, j);
                    let b = self.slot(p, j);
                    self.data.swap(a, b);
                }
            }
            pivots.push(p);
            let pivot = self.get(k, k);
            for r in k + 1..=last_row {
                let sr = self.slot(r, k);
                let l = self.data[sr] / pivot;
                self.data[sr] = l;
                if l == T::zero() {
                    continue;
                }
                for j in k + 1..=last_col {
                    let kj = self.data[self.slot(k, j)];
                    let rj = self.slot(r, j);
                    self.data[rj] -= l * kj;
                }
            }
        }
        Ok(BandLu {
            factors: self,
            pivots,
        })
    }
}

/// Factored band matrix.
#[derive(Debug, Clone)]
pub struct BandLu<T> {
    factors: BandMatrix<T>,
    pivots: Vec<usize>,
}

impl<T: Real> BandLu<T> {
    pub fn solve_in_place(&self, b: &mut [T]) {
        let f = &self.factors;
        let n = f.n;
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk == T::zero() {
                continue;
            }
            for r in k + 1..=(k + f.kl).min(n - 1) {
                b[r] -= f.get(r, k) * bk;
            }
        }
        let reach = f.ku + f.kl;
        for k in (0..n).rev() {
            let mut acc = b[k];
            for j in k + 1..=(k + reach).min(n - 1) {
                acc -= f.get(k, j) * b[j];
            }
            b[k] = acc / f.get(k, k);
        }
    }
}

/// Direct solver for a band matrix plus a few wrap-around (corner) entries.
///
/// Periodic stencils produce such matrices. The corners are treated as a
/// low-rank correction of the band part (Sherman-Morrison-Woodbury).
pub struct CyclicBandSolver<T: Real> {
    lu: BandLu<T>,
    corner_cols: Vec<usize>,
    correction_cols: DMatrix<T>,
    capacitance: nalgebra::LU<T, nalgebra::Dyn, nalgebra::Dyn>,
}

impl<T: Real> CyclicBandSolver<T> {
    /// `corners` are `(row, col, value)` entries outside the band of `band`.
    pub fn new(band: BandMatrix<T>, corners: &[(usize, usize, T)]) -> Result<Self, LinalgError> {
        let n = band.dim();
        let lu = band.factor()?;
        let r = corners.len();
        let mut correction_cols = DMatrix::zeros(n, r);
        for (c, &(row, _, value)) in corners.iter().enumerate() {
            let mut e = vec![T::zero(); n];
            e[row] = value;
            lu.solve_in_place(&mut e);
            correction_cols.set_column(c, &DVector::from_vec(e));
        }
        let corner_cols: Vec<usize> = corners.iter().map(|&(_, col, _)| col).collect();
        let mut cap = DMatrix::identity(r, r);
        for (a, &col) in corner_cols.iter().enumerate() {
            for b in 0..r {
                cap[(a, b)] += correction_cols[(col, b)];
            }
        }
        let capacitance = cap.lu();
        if r > 0 && !capacitance.is_invertible() {
            return Err(LinalgError::Singular {
                pivot: n,
                magnitude: 0.0,
            });
        }
        Ok(Self {
            lu,
            corner_cols,
            correction_cols,
            capacitance,
        })
    }

    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>, LinalgError> {
        let mut y = rhs.to_vec();
        self.lu.solve_in_place(&mut y);
        if self.corner_cols.is_empty() {
            return Ok(y);
        }
        let vy = DVector::from_iterator(
            self.corner_cols.len(),
            self.corner_cols.iter().map(|&c| y[c]),
        );
        let t = self.capacitance.solve(&vy).ok_or(LinalgError::Singular {
            pivot: 0,
            magnitude: 0.0,
        })?;
        let correction = &self.correction_cols * t;
        for (yi, ci) in y.iter_mut().zip(correction.iter()) {
            *yi -= *ci;
        }
        Ok(y)
    }
}

//! Small dense linear-algebra helpers shared by the conditioning and
//! sampling code. Factorizations are delegated to nalgebra; everything else
//! in the crate works with ndarray storage.

use nalgebra::{Cholesky, DMatrix, Dyn};
use ndarray::{Array2, ArrayView2};

/// A Cholesky factorization of a symmetric positive-definite matrix,
/// usable for repeated solves.
pub(crate) struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    /// Factors `a` (assumed symmetric). Returns `None` when `a` is not
    /// numerically positive definite.
    pub fn new(a: ArrayView2<'_, f64>) -> Option<Self> {
        let n = a.nrows();
        let m = DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
        Cholesky::new(m).map(|chol| Self { chol })
    }

    /// Solves `A X = B` for a dense right-hand side given column-by-column.
    /// `b` has shape (n, k); the result has the same shape.
    pub fn solve(&self, b: ArrayView2<'_, f64>) -> Array2<f64> {
        let (n, k) = b.dim();
        let rhs = DMatrix::from_fn(n, k, |i, j| b[[i, j]]);
        let sol = self.chol.solve(&rhs);
        Array2::from_shape_fn((n, k), |(i, j)| sol[(i, j)])
    }
}

/// Extreme eigenvalues (min, max) of a symmetric matrix.
pub(crate) fn sym_eigen_bounds(a: ArrayView2<'_, f64>) -> (f64, f64) {
    let n = a.nrows();
    if n == 0 {
        return (0.0, 0.0);
    }
    let m = DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
    let eigen = m.symmetric_eigenvalues();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in eigen.iter() {
        min = min.min(v);
        max = max.max(v);
    }
    (min, max)
}

/// Condition-number estimate of a symmetric matrix from its eigenvalue
/// spread. Non-positive smallest eigenvalue maps to infinity.
pub(crate) fn sym_condition_estimate(a: ArrayView2<'_, f64>) -> f64 {
    let (min, max) = sym_eigen_bounds(a);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Lower-triangular `L` with `L Lᵀ = a` for positive *semi*-definite `a`.
///
/// Pivots within `rel_tol * max_diag` of zero produce an all-zero column, so
/// exactly degenerate directions (a constant feature, say) factor cleanly
/// instead of failing. Returns `None` when a pivot is negative beyond the
/// tolerance, i.e. the matrix is indefinite.
pub(crate) fn psd_cholesky(a: ArrayView2<'_, f64>, rel_tol: f64) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    let max_diag = (0..n).map(|i| a[[i, i]].abs()).fold(0.0f64, f64::max);
    let tol = rel_tol * max_diag.max(1.0);
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if d > tol {
            let root = d.sqrt();
            l[[j, j]] = root;
            for i in (j + 1)..n {
                let mut v = a[[i, j]];
                for k in 0..j {
                    v -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = v / root;
            }
        } else if d >= -tol {
            // Semi-definite direction: leave the column at zero.
        } else {
            return None;
        }
    }
    Some(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn spd_solve_recovers_identity() {
        let a = array![[4.0, 1.0], [1.0, 3.0]];
        let f = SpdFactor::new(a.view()).unwrap();
        let b = array![[1.0, 0.0], [0.0, 1.0]];
        let inv = f.solve(b.view());
        let prod = a.dot(&inv);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[[i, j]] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spd_factor_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(SpdFactor::new(a.view()).is_none());
    }

    #[test]
    fn psd_cholesky_handles_zero_variance_direction() {
        let a = array![[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 2.0]];
        let l = psd_cholesky(a.view(), 1e-12).unwrap();
        let rebuilt = l.dot(&l.t());
        for i in 0..3 {
            for j in 0..3 {
                assert!((rebuilt[[i, j]] - a[[i, j]]).abs() < 1e-14);
            }
        }
        assert_eq!(l[[1, 1]], 0.0);
    }

    #[test]
    fn psd_cholesky_rejects_indefinite() {
        let a = array![[1.0, 0.0], [0.0, -1.0]];
        assert!(psd_cholesky(a.view(), 1e-12).is_none());
    }

    #[test]
    fn eigen_bounds_match_known_values() {
        // Pair correlation at rho: eigenvalues {1, 1 - rho, 1 + rho}.
        let rho = 0.8;
        let a = array![[1.0, 0.0, 0.0], [0.0, 1.0, rho], [0.0, rho, 1.0]];
        let (min, max) = sym_eigen_bounds(a.view());
        assert!((min - (1.0 - rho)).abs() < 1e-12);
        assert!((max - (1.0 + rho)).abs() < 1e-12);
    }
}

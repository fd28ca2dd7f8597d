//! The Gaussian data model: a mean vector and covariance matrix that stand
//! in for the feature distribution when conditioning on coalitions.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::sym_eigen_bounds;

/// Maximum tolerated absolute asymmetry in a covariance matrix.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Eigenvalues may undershoot zero by this fraction of the largest diagonal
/// entry before the matrix is rejected as not PSD.
pub const PSD_TOL: f64 = 1e-8;

/// Mean and covariance of the feature distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    mean: Array1<f64>,
    covariance: Array2<f64>,
    fingerprint: [u8; 32],
}

impl GaussianSpec {
    /// Validates and wraps a mean/covariance pair.
    ///
    /// The covariance must be square, symmetric within [`SYMMETRY_TOL`],
    /// positive semi-definite within [`PSD_TOL`] of its largest diagonal
    /// entry, and dimensioned like the mean. All entries must be finite.
    pub fn new(mean: Array1<f64>, covariance: Array2<f64>) -> Result<Self> {
        let n = mean.len();
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "mean has length {n} but covariance is {}x{}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        for (i, v) in mean.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteInput { row: 0, col: i });
            }
        }
        for ((i, j), v) in covariance.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFiniteInput { row: i, col: j });
            }
        }
        let mut asym = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                asym = asym.max((covariance[[i, j]] - covariance[[j, i]]).abs());
            }
        }
        if asym > SYMMETRY_TOL {
            return Err(Error::NotPsd(format!(
                "covariance is asymmetric (max |a_ij - a_ji| = {asym:.3e})"
            )));
        }
        if n > 0 {
            let max_diag = covariance.diag().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            let (min_eig, _) = sym_eigen_bounds(covariance.view());
            if min_eig < -PSD_TOL * max_diag.max(1.0) {
                return Err(Error::NotPsd(format!(
                    "minimum eigenvalue {min_eig:.3e} is below tolerance"
                )));
            }
        }
        let fingerprint = fingerprint_of(mean.view(), covariance.view());
        Ok(Self { mean, covariance, fingerprint })
    }

    /// Number of features.
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> ArrayView1<'_, f64> {
        self.mean.view()
    }

    pub fn covariance(&self) -> ArrayView2<'_, f64> {
        self.covariance.view()
    }

    /// SHA-256 over the dimension and the raw little-endian bytes of the
    /// mean and covariance. Transform tensors record this so a tensor can
    /// only be replayed against the distribution it was built for.
    pub fn fingerprint(&self) -> &[u8; 32] {
        &self.fingerprint
    }

    pub fn fingerprint_hex(&self) -> String {
        hex::encode(self.fingerprint)
    }
}

fn fingerprint_of(mean: ArrayView1<'_, f64>, covariance: ArrayView2<'_, f64>) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"linshap-gaussian-v1");
    hasher.update((mean.len() as u64).to_le_bytes());
    for v in mean.iter() {
        hasher.update(v.to_le_bytes());
    }
    for v in covariance.iter() {
        hasher.update(v.to_le_bytes());
    }
    hasher.finalize().into()
}

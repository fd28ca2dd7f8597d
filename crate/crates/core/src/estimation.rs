//! Building Gaussian data models from raw data matrices.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianSpec;

/// A samples-by-features matrix with optional column names. Construction
/// rejects non-finite cells, so downstream code can assume clean values.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
    column_names: Option<Vec<String>>,
}

impl DataMatrix {
    pub fn new(values: Array2<f64>, column_names: Option<Vec<String>>) -> Result<Self> {
        if let Some(names) = &column_names {
            if names.len() != values.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "{} column names for {} columns",
                    names.len(),
                    values.ncols()
                )));
            }
        }
        for ((i, j), v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFiniteInput { row: i, col: j });
            }
        }
        Ok(Self { values, column_names })
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    /// Column means and standard deviations (divisor M-1). Zero-variance
    /// columns report a standard deviation of 0.
    pub fn column_moments(&self) -> (Array1<f64>, Array1<f64>) {
        let m = self.rows() as f64;
        let mean = self.values.mean_axis(Axis(0)).expect("at least one row");
        let mut std = Array1::<f64>::zeros(self.cols());
        if self.rows() > 1 {
            for j in 0..self.cols() {
                let col = self.values.column(j);
                let var = col.iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / (m - 1.0);
                std[j] = var.sqrt();
            }
        }
        (mean, std)
    }

    /// Z-scores every column in place, skipping zero-variance columns, and
    /// returns the (mean, std) pair used. Keeping the model and the
    /// distribution estimate in the same coordinates is the caller's job:
    /// apply this before both.
    pub fn standardize(&mut self) -> (Array1<f64>, Array1<f64>) {
        let (mean, std) = self.column_moments();
        for j in 0..self.cols() {
            let s = if std[j] > 0.0 { std[j] } else { 1.0 };
            let mu = mean[j];
            self.values.column_mut(j).mapv_inplace(|v| (v - mu) / s);
        }
        (mean, std)
    }
}

/// Shrinkage target for ill-conditioned sample covariances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShrinkageTarget {
    /// Keep the sample diagonal, zero the off-diagonal part.
    DiagonalOfSample,
    /// `(trace(Sigma)/N) I`.
    ScaledIdentity,
}

/// Convex blend `(1 - intensity) Sigma + intensity * target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageConfig {
    pub intensity: f64,
    pub target: ShrinkageTarget,
}

impl ShrinkageConfig {
    pub fn new(intensity: f64, target: ShrinkageTarget) -> Result<Self> {
        if !(0.0..=1.0).contains(&intensity) {
            return Err(Error::InvalidArgument(format!(
                "shrinkage intensity {intensity} outside [0, 1]"
            )));
        }
        Ok(Self { intensity, target })
    }
}

/// Column means and the unbiased (divisor M-1) sample covariance.
pub fn empirical_moments(data: &DataMatrix) -> Result<GaussianSpec> {
    let m = data.rows();
    if m < 2 {
        return Err(Error::TooFewSamples { got: m, required: 2 });
    }
    let n = data.cols();
    let values = data.values();
    let mean = values.mean_axis(Axis(0)).expect("rows checked");
    let centered = &values - &mean.view().insert_axis(Axis(0));
    let mut cov = centered.t().dot(&centered) / (m as f64 - 1.0);
    // Symmetrize away the last-bit asymmetry of the accumulation order.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (cov[[i, j]] + cov[[j, i]]);
            cov[[i, j]] = v;
            cov[[j, i]] = v;
        }
    }
    GaussianSpec::new(mean, cov)
}

/// Blends the covariance toward the configured target. The mean is
/// untouched; both targets preserve the trace.
pub fn shrink(spec: &GaussianSpec, cfg: &ShrinkageConfig) -> Result<GaussianSpec> {
    let n = spec.dim();
    let lambda = cfg.intensity;
    let cov = spec.covariance();
    let mut out = cov.to_owned();
    match cfg.target {
        ShrinkageTarget::DiagonalOfSample => {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        out[[i, j]] = (1.0 - lambda) * cov[[i, j]];
                    }
                }
            }
        }
        ShrinkageTarget::ScaledIdentity => {
            let mu = cov.diag().sum() / n as f64;
            for i in 0..n {
                for j in 0..n {
                    let t = if i == j { mu } else { 0.0 };
                    out[[i, j]] = (1.0 - lambda) * cov[[i, j]] + lambda * t;
                }
            }
        }
    }
    GaussianSpec::new(spec.mean().to_owned(), out)
}

//! Linear models: the only model class this crate explains.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What the linear score means.
///
/// `LogitMargin` marks a classifier whose score is the log-odds; every
/// attribution explains that linear score, never the sigmoid output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Identity,
    LogitMargin,
}

/// `f(x) = beta . x + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Array1<f64>,
    pub intercept: f64,
    pub link: Link,
}

impl LinearModel {
    pub fn new(coefficients: Array1<f64>, intercept: f64, link: Link) -> Self {
        Self { coefficients, intercept, link }
    }

    /// Number of features the model reads.
    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "model has {} coefficients but input has {} features",
                self.dim(),
                got
            )));
        }
        Ok(())
    }

    /// The linear score for one sample (the log-odds under `LogitMargin`).
    pub fn margin(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.coefficients.dot(&x) + self.intercept)
    }

    /// Linear scores for each row of `data`.
    pub fn predict_margin(&self, data: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.check_dim(data.ncols())?;
        Ok(data.dot(&self.coefficients) + self.intercept)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn margin_is_dot_plus_intercept() {
        let m = LinearModel::new(array![1.0, 2.0, 3.0], 0.5, Link::Identity);
        assert_eq!(m.margin(array![1.0, 1.0, 1.0].view()).unwrap(), 6.5);
    }

    #[test]
    fn identity_model_passes_feature_through() {
        let m = LinearModel::new(array![1.0], 0.0, Link::Identity);
        let data = array![[3.5], [-2.0]];
        let out = m.predict_margin(data.view()).unwrap();
        assert_eq!(out, array![3.5, -2.0]);
    }

    #[test]
    fn zero_model_predicts_intercept() {
        let m = LinearModel::new(array![0.0, 0.0], 1.25, Link::LogitMargin);
        let data = array![[3.0, 4.0], [5.0, 6.0]];
        assert_eq!(m.predict_margin(data.view()).unwrap(), array![1.25, 1.25]);
    }

    #[test]
    fn rejects_wrong_width() {
        let m = LinearModel::new(array![1.0, 2.0], 0.0, Link::Identity);
        assert!(m.margin(array![1.0].view()).is_err());
    }
}

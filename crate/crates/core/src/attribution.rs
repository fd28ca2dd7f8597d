//! Attributions: contracting a transform tensor with a model and producing
//! per-sample Shapley values.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::conditional::{coalition_value_with, RidgePolicy, ValueMode};
use crate::error::{Error, Result};
use crate::gaussian::GaussianSpec;
use crate::model::LinearModel;
use crate::subset::FeatureSubset;
use crate::transforms::{shapley_weight, TensorMode, TransformTensor};

/// Scale at which the subset-enumeration oracle stays affordable.
pub const BRUTE_FORCE_CAP: usize = 12;

/// Which value function (and which estimator of it) produced an attribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionMode {
    Interventional,
    ObservationalExact,
    ObservationalSampled,
}

impl std::fmt::Display for AttributionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AttributionMode::Interventional => "interventional",
            AttributionMode::ObservationalExact => "observational_exact",
            AttributionMode::ObservationalSampled => "observational_sampled",
        };
        f.write_str(s)
    }
}

/// Per-feature Shapley values for one explained sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    /// One value per feature, in model output units.
    pub values: Array1<f64>,
    /// Expected model output, `beta . mu + b`.
    pub base_value: f64,
    pub mode: AttributionMode,
}

impl Attribution {
    /// `base_value + sum(values)`: the model output the attribution explains.
    pub fn reconstructed_output(&self) -> f64 {
        self.base_value + self.values.sum()
    }
}

/// A transform tensor contracted with one model: row `i` of `C` is
/// `beta . T_mu[i]`, row `i` of `D` is `beta . T_x[i]`, and an attribution is
/// `phi = C mu + D x`. The product `C mu` is folded in at construction, so
/// explaining a sample costs one matrix-vector product.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionOperator {
    c: Array2<f64>,
    d: Array2<f64>,
    mean: Array1<f64>,
    c_mu: Array1<f64>,
    base_value: f64,
    mode: AttributionMode,
}

impl AttributionOperator {
    pub fn c(&self) -> &Array2<f64> {
        &self.c
    }

    pub fn d(&self) -> &Array2<f64> {
        &self.d
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn base_value(&self) -> f64 {
        self.base_value
    }

    pub fn mode(&self) -> AttributionMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Contracts a tensor with a model. The tensor is untouched and can be
/// contracted again with any other model over the same distribution.
pub fn contract(tensor: &TransformTensor, model: &LinearModel) -> Result<AttributionOperator> {
    let n = tensor.dim();
    if model.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "model has {} coefficients but the tensor covers {n} features",
            model.dim()
        )));
    }
    let beta = &model.coefficients;
    let mut c = Array2::<f64>::zeros((n, n));
    let mut d = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        c.row_mut(i).assign(&tensor.t_mu(i).t().dot(beta));
        d.row_mut(i).assign(&tensor.t_x(i).t().dot(beta));
    }
    let mean = tensor.mean().clone();
    let c_mu = c.dot(&mean);
    let base_value = beta.dot(&mean) + model.intercept;
    let mode = match tensor.mode() {
        TensorMode::Exact => AttributionMode::ObservationalExact,
        TensorMode::Sampled => AttributionMode::ObservationalSampled,
    };
    Ok(AttributionOperator { c, d, mean, c_mu, base_value, mode })
}

/// Observational attribution of one sample: `phi = C mu + D x`.
pub fn attribute_observational(
    op: &AttributionOperator,
    x: ArrayView1<'_, f64>,
) -> Result<Attribution> {
    if x.len() != op.dim() {
        return Err(Error::DimensionMismatch(format!(
            "sample has {} features but the operator covers {}",
            x.len(),
            op.dim()
        )));
    }
    let values = &op.c_mu + &op.d.dot(&x);
    Ok(Attribution { values, base_value: op.base_value, mode: op.mode })
}

/// Observational attribution of a batch, one row per sample, preserving row
/// order.
pub fn attribute_observational_batch(
    op: &AttributionOperator,
    x: ArrayView2<'_, f64>,
) -> Result<Vec<Attribution>> {
    if x.ncols() != op.dim() {
        return Err(Error::DimensionMismatch(format!(
            "batch has {} columns but the operator covers {} features",
            x.ncols(),
            op.dim()
        )));
    }
    let phi = x.dot(&op.d.t()) + &op.c_mu;
    Ok(phi
        .axis_iter(Axis(0))
        .map(|row| Attribution {
            values: row.to_owned(),
            base_value: op.base_value,
            mode: op.mode,
        })
        .collect())
}

/// Interventional attribution: `phi_i = beta_i (x_i - mu_i)`, independent of
/// any covariance. A feature the model ignores gets exactly zero.
pub fn attribute_interventional(
    model: &LinearModel,
    mean: ArrayView1<'_, f64>,
    x: ArrayView1<'_, f64>,
) -> Result<Attribution> {
    let n = model.dim();
    if mean.len() != n || x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "model has {n} coefficients but mean has {} and sample has {}",
            mean.len(),
            x.len()
        )));
    }
    let values = Array1::from_shape_fn(n, |i| model.coefficients[i] * (x[i] - mean[i]));
    let base_value = model.coefficients.dot(&mean) + model.intercept;
    Ok(Attribution { values, base_value, mode: AttributionMode::Interventional })
}

/// Interventional attribution of a batch, preserving row order.
pub fn attribute_interventional_batch(
    model: &LinearModel,
    mean: ArrayView1<'_, f64>,
    x: ArrayView2<'_, f64>,
) -> Result<Vec<Attribution>> {
    x.axis_iter(Axis(0))
        .map(|row| attribute_interventional(model, mean, row))
        .collect()
}

/// Direct weighted-subset Shapley evaluation, `phi_i = sum over S excluding
/// i of W(|S|, N) [v(S u i) - v(S)]`.
///
/// This is the oracle the transform path is checked against: it shares no
/// code with the tensor accumulation beyond the conditional expectation
/// itself. Exponential in the feature count, hence the cap.
pub fn brute_force_shapley(
    model: &LinearModel,
    spec: &GaussianSpec,
    x: ArrayView1<'_, f64>,
    mode: ValueMode,
) -> Result<Attribution> {
    brute_force_shapley_with(model, spec, x, mode, &RidgePolicy::default())
}

/// [`brute_force_shapley`] under an explicit ridge policy.
pub fn brute_force_shapley_with(
    model: &LinearModel,
    spec: &GaussianSpec,
    x: ArrayView1<'_, f64>,
    mode: ValueMode,
    policy: &RidgePolicy,
) -> Result<Attribution> {
    let n = spec.dim();
    if n > BRUTE_FORCE_CAP {
        return Err(Error::CapExceeded { n, cap: BRUTE_FORCE_CAP });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("distribution has no features".into()));
    }
    let mut values_by_mask = vec![0.0f64; 1 << n];
    for (mask, slot) in values_by_mask.iter_mut().enumerate() {
        let subset = FeatureSubset::from_mask(mask as u64, n);
        *slot = coalition_value_with(model, spec, x, &subset, mode, policy)?;
    }
    let mut values = Array1::<f64>::zeros(n);
    for i in 0..n {
        let bit = 1usize << i;
        let mut phi = 0.0;
        for (mask, v) in values_by_mask.iter().enumerate() {
            if mask & bit == 0 {
                let w = shapley_weight(mask.count_ones() as usize, n);
                phi += w * (values_by_mask[mask | bit] - v);
            }
        }
        values[i] = phi;
    }
    let base_value = model.coefficients.dot(&spec.mean()) + model.intercept;
    let attribution_mode = match mode {
        ValueMode::Interventional => AttributionMode::Interventional,
        ValueMode::Observational => AttributionMode::ObservationalExact,
    };
    Ok(Attribution { values, base_value, mode: attribution_mode })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Link;
    use crate::transforms::exact_transforms;
    use ndarray::array;

    fn pair_spec(rho: f64) -> GaussianSpec {
        let cov = array![[1.0, 0.0, 0.0], [0.0, 1.0, rho], [0.0, rho, 1.0]];
        GaussianSpec::new(Array1::zeros(3), cov).unwrap()
    }

    fn fig1_model() -> LinearModel {
        LinearModel::new(array![1.0, 2.0, 3.0], 0.0, Link::Identity)
    }

    #[test]
    fn independent_case_matches_interventional() {
        let spec = GaussianSpec::new(Array1::zeros(3), Array2::eye(3)).unwrap();
        let model = fig1_model();
        let x = array![1.0, 1.0, 1.0];
        let tensor = exact_transforms(&spec, 20).unwrap();
        let op = contract(&tensor, &model).unwrap();
        let obs = attribute_observational(&op, x.view()).unwrap();
        let int = attribute_interventional(&model, spec.mean(), x.view()).unwrap();
        for i in 0..3 {
            assert!((obs.values[i] - (i + 1) as f64).abs() < 1e-12);
            assert!((int.values[i] - (i + 1) as f64).abs() < 1e-12);
        }
        // Independence case: C = -diag(beta), D = diag(beta).
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { (i + 1) as f64 } else { 0.0 };
                assert!((op.d()[[i, j]] - want).abs() < 1e-12);
                assert!((op.c()[[i, j]] + want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pair_correlation_splits_credit() {
        for rho in [0.25, 0.5, 0.8] {
            let spec = pair_spec(rho);
            let model = fig1_model();
            let x = array![1.0, 1.0, 1.0];
            let tensor = exact_transforms(&spec, 20).unwrap();
            let op = contract(&tensor, &model).unwrap();
            let phi = attribute_observational(&op, x.view()).unwrap().values;
            assert!((phi[0] - 1.0).abs() < 1e-10, "rho {rho}: phi0 {}", phi[0]);
            assert!((phi[1] - (2.0 + rho / 2.0)).abs() < 1e-10);
            assert!((phi[2] - (3.0 - rho / 2.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn dummy_feature_receives_observational_credit_only() {
        let rho = 0.8;
        let cov = array![[1.0, rho], [rho, 1.0]];
        let spec = GaussianSpec::new(Array1::zeros(2), cov).unwrap();
        let model = LinearModel::new(array![1.0, 0.0], 0.0, Link::Identity);
        let x = array![1.0, 1.0];
        let tensor = exact_transforms(&spec, 20).unwrap();
        let op = contract(&tensor, &model).unwrap();
        let obs = attribute_observational(&op, x.view()).unwrap().values;
        assert!((obs[0] - (1.0 - rho / 2.0)).abs() < 1e-10);
        assert!((obs[1] - rho / 2.0).abs() < 1e-10);
        let int = attribute_interventional(&model, spec.mean(), x.view()).unwrap().values;
        assert_eq!(int[1], 0.0);
        assert!((int[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn brute_force_agrees_with_transforms() {
        let spec = pair_spec(0.8);
        let model = fig1_model();
        let x = array![1.0, 1.0, 1.0];
        let oracle =
            brute_force_shapley(&model, &spec, x.view(), ValueMode::Observational).unwrap();
        let tensor = exact_transforms(&spec, 20).unwrap();
        let op = contract(&tensor, &model).unwrap();
        let phi = attribute_observational(&op, x.view()).unwrap().values;
        for i in 0..3 {
            assert!((oracle.values[i] - phi[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn brute_force_interventional_reduces_to_closed_form() {
        let spec = pair_spec(0.6);
        let model = fig1_model();
        let x = array![0.4, -1.0, 2.0];
        let oracle =
            brute_force_shapley(&model, &spec, x.view(), ValueMode::Interventional).unwrap();
        let closed = attribute_interventional(&model, spec.mean(), x.view()).unwrap();
        for i in 0..3 {
            assert!((oracle.values[i] - closed.values[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn single_feature_game_gives_full_marginal_in_both_modes() {
        let spec = GaussianSpec::new(array![0.5], array![[2.0]]).unwrap();
        let model = LinearModel::new(array![3.0], 1.0, Link::Identity);
        let x = array![2.5];
        for mode in [ValueMode::Observational, ValueMode::Interventional] {
            let phi = brute_force_shapley(&model, &spec, x.view(), mode).unwrap();
            assert!((phi.values[0] - 3.0 * (2.5 - 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn explained_point_at_the_mean_gets_zero_interventional_attribution() {
        let model = fig1_model();
        let mean = array![0.3, -0.2, 1.0];
        let phi = attribute_interventional(&model, mean.view(), mean.view()).unwrap();
        assert!(phi.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn contraction_is_linear_in_the_model_and_reusable() {
        let spec = pair_spec(0.5);
        let tensor = exact_transforms(&spec, 20).unwrap();
        let beta1 = array![1.0, -2.0, 0.5];
        let beta2 = array![0.0, 1.0, 3.0];
        let alpha = 1.75;
        let m1 = LinearModel::new(beta1.clone(), 0.0, Link::Identity);
        let m2 = LinearModel::new(beta2.clone(), 0.0, Link::Identity);
        let combo = LinearModel::new(alpha * &beta1 + &beta2, 0.0, Link::Identity);
        let x = array![0.7, -0.4, 1.2];
        let phi = |m: &LinearModel| {
            let op = contract(&tensor, m).unwrap();
            attribute_observational(&op, x.view()).unwrap().values
        };
        let (p1, p2, pc) = (phi(&m1), phi(&m2), phi(&combo));
        for i in 0..3 {
            assert!((pc[i] - (alpha * p1[i] + p2[i])).abs() < 1e-10);
        }
        // Column sums of D recover beta; of C recover -beta.
        let op = contract(&tensor, &m1).unwrap();
        for j in 0..3 {
            let dsum: f64 = op.d().column(j).sum();
            let csum: f64 = op.c().column(j).sum();
            assert!((dsum - beta1[j]).abs() < 1e-8);
            assert!((csum + beta1[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn batch_preserves_row_order() {
        let spec = pair_spec(0.4);
        let model = fig1_model();
        let tensor = exact_transforms(&spec, 20).unwrap();
        let op = contract(&tensor, &model).unwrap();
        let batch = array![[1.0, 1.0, 1.0], [0.0, 0.0, 0.0], [1.0, -1.0, 2.0]];
        let all = attribute_observational_batch(&op, batch.view()).unwrap();
        assert_eq!(all.len(), 3);
        for (row, attribution) in batch.axis_iter(Axis(0)).zip(&all) {
            let single = attribute_observational(&op, row).unwrap();
            assert_eq!(single.values, attribution.values);
        }
    }

    #[test]
    fn brute_force_cap_is_enforced() {
        let n = 13;
        let spec = GaussianSpec::new(Array1::zeros(n), Array2::eye(n)).unwrap();
        let model = LinearModel::new(Array1::ones(n), 0.0, Link::Identity);
        let x = Array1::ones(n);
        assert!(matches!(
            brute_force_shapley(&model, &spec, x.view(), ValueMode::Interventional),
            Err(Error::CapExceeded { .. })
        ));
    }
}

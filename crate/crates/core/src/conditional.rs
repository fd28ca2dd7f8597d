//! Gaussian conditioning on coalitions.
//!
//! For a coalition `S` of known features, the conditional mean of the full
//! feature vector factors into two matrices acting on the distribution mean
//! and on the explained sample,
//!
//! ```text
//! E[x | x_S] = A_S mu + B_S x,
//! A_S = Q_Sbar - U_S,      B_S = Q_S + U_S,
//! U_S = Q_Sbar Sigma P_S^T (P_S Sigma P_S^T)^{-1} P_S,
//! ```
//!
//! where `P_S` selects the members of `S` and `Q_S = P_S^T P_S` zero-pads a
//! selection back to full dimension. Everything downstream (coalition
//! values, exact and sampled transforms) is built from these operators.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianSpec;
use crate::linalg::{sym_condition_estimate, SpdFactor};
use crate::model::LinearModel;
use crate::subset::FeatureSubset;

/// How a conditioning subset defines the coalition value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueMode {
    /// `v(S) = E[f(X) | X_S = x_S]`, respecting feature correlations.
    Observational,
    /// `v(S) = E[f(x) | do(S)]`, unknown features pinned to their means.
    Interventional,
}

/// Handling of singular or ill-conditioned `Sigma_SS` blocks.
///
/// When `enabled`, a failed factorization retries once with the diagonal
/// ridge `Sigma_SS + lambda I`, `lambda = 1e-9 * trace(Sigma_SS) / |S|`, and
/// the event is counted in the tensor metadata. When disabled, a block whose
/// condition estimate exceeds `condition_cap` is a hard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgePolicy {
    pub enabled: bool,
    pub condition_cap: f64,
}

impl Default for RidgePolicy {
    fn default() -> Self {
        Self { enabled: true, condition_cap: 1e12 }
    }
}

pub(crate) const RIDGE_SCALE: f64 = 1e-9;

/// The data-dependent block of `U_S`: the `|S| x |N\S|` matrix
/// `G = Sigma_SS^{-1} Sigma_{S,Sbar}`, so that `U_S[c_r, m_j] = G[j, r]`.
pub(crate) fn subset_gain(
    cov: ArrayView2<'_, f64>,
    members: &[usize],
    complement: &[usize],
    policy: &RidgePolicy,
    ridge_events: &mut u64,
) -> Result<Array2<f64>> {
    let s = members.len();
    let t = complement.len();
    let sigma_ss = Array2::from_shape_fn((s, s), |(i, j)| cov[[members[i], members[j]]]);
    let rhs = Array2::from_shape_fn((s, t), |(i, j)| cov[[members[i], complement[j]]]);

    if !policy.enabled {
        let condition = sym_condition_estimate(sigma_ss.view());
        if condition > policy.condition_cap {
            return Err(Error::SingularSubmatrix { condition, cap: policy.condition_cap });
        }
    }
    let factor = match SpdFactor::new(sigma_ss.view()) {
        Some(f) => f,
        None if policy.enabled => {
            let lambda = RIDGE_SCALE * sigma_ss.diag().sum() / s as f64;
            let mut ridged = sigma_ss;
            for i in 0..s {
                ridged[[i, i]] += lambda;
            }
            *ridge_events += 1;
            SpdFactor::new(ridged.view()).ok_or(Error::SingularSubmatrix {
                condition: f64::INFINITY,
                cap: policy.condition_cap,
            })?
        }
        None => {
            return Err(Error::SingularSubmatrix {
                condition: f64::INFINITY,
                cap: policy.condition_cap,
            })
        }
    };
    Ok(factor.solve(rhs.view()))
}

/// Writes `A_S` and `B_S` into caller-owned `n x n` buffers.
pub(crate) fn materialize_operators(
    members: &[usize],
    complement: &[usize],
    gain: &Array2<f64>,
    a: &mut Array2<f64>,
    b: &mut Array2<f64>,
) {
    a.fill(0.0);
    b.fill(0.0);
    for &m in members {
        b[[m, m]] = 1.0;
    }
    for (r, &c) in complement.iter().enumerate() {
        a[[c, c]] = 1.0;
        for (j, &m) in members.iter().enumerate() {
            let g = gain[[j, r]];
            b[[c, m]] = g;
            a[[c, m]] = -g;
        }
    }
}

/// Accumulates `w * A_S` into `t_mu` and `w * B_S` into `t_x`, walking only
/// the structural nonzeros of the operators.
pub(crate) fn accumulate_operators(
    members: &[usize],
    complement: &[usize],
    gain: &Array2<f64>,
    w: f64,
    t_mu: &mut Array2<f64>,
    t_x: &mut Array2<f64>,
) {
    for &m in members {
        t_x[[m, m]] += w;
    }
    for (r, &c) in complement.iter().enumerate() {
        t_mu[[c, c]] += w;
        for (j, &m) in members.iter().enumerate() {
            let wg = w * gain[[j, r]];
            t_x[[c, m]] += wg;
            t_mu[[c, m]] -= wg;
        }
    }
}

fn check_dims(spec: &GaussianSpec, x: ArrayView1<'_, f64>, subset: &FeatureSubset) -> Result<()> {
    let n = spec.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "sample has {} features but the distribution has {n}",
            x.len()
        )));
    }
    if subset.universe_size() != n {
        return Err(Error::DimensionMismatch(format!(
            "subset universe is {} but the distribution has {n} features",
            subset.universe_size()
        )));
    }
    Ok(())
}

/// `E[x | x_S]` as a full-dimension vector: known features keep their sample
/// values, unknown features move to their conditional means. `S = {}` yields
/// the mean exactly and the full set yields `x` exactly.
pub fn conditional_expectation(
    spec: &GaussianSpec,
    x: ArrayView1<'_, f64>,
    subset: &FeatureSubset,
) -> Result<Array1<f64>> {
    conditional_expectation_with(spec, x, subset, &RidgePolicy::default())
}

/// [`conditional_expectation`] under an explicit ridge policy.
pub fn conditional_expectation_with(
    spec: &GaussianSpec,
    x: ArrayView1<'_, f64>,
    subset: &FeatureSubset,
    policy: &RidgePolicy,
) -> Result<Array1<f64>> {
    check_dims(spec, x, subset)?;
    if subset.is_empty() {
        return Ok(spec.mean().to_owned());
    }
    if subset.is_full() {
        return Ok(x.to_owned());
    }
    let members = subset.members();
    let complement = subset.complement_members();
    let mut ridge_events = 0;
    let gain = subset_gain(spec.covariance(), members, &complement, policy, &mut ridge_events)?;
    let mu = spec.mean();
    let mut out = mu.to_owned();
    for &m in members {
        out[m] = x[m];
    }
    for (r, &c) in complement.iter().enumerate() {
        let mut acc = mu[c];
        for (j, &m) in members.iter().enumerate() {
            acc += gain[[j, r]] * (x[m] - mu[m]);
        }
        out[c] = acc;
    }
    Ok(out)
}

/// The coalition value `v(S)` for a linear model under either value mode.
pub fn coalition_value(
    model: &LinearModel,
    spec: &GaussianSpec,
    x: ArrayView1<'_, f64>,
    subset: &FeatureSubset,
    mode: ValueMode,
) -> Result<f64> {
    coalition_value_with(model, spec, x, subset, mode, &RidgePolicy::default())
}

/// [`coalition_value`] under an explicit ridge policy.
pub fn coalition_value_with(
    model: &LinearModel,
    spec: &GaussianSpec,
    x: ArrayView1<'_, f64>,
    subset: &FeatureSubset,
    mode: ValueMode,
    policy: &RidgePolicy,
) -> Result<f64> {
    check_dims(spec, x, subset)?;
    if model.dim() != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} coefficients but the distribution has {} features",
            model.dim(),
            spec.dim()
        )));
    }
    match mode {
        ValueMode::Observational => {
            let e = conditional_expectation_with(spec, x, subset, policy)?;
            Ok(model.coefficients.dot(&e) + model.intercept)
        }
        ValueMode::Interventional => {
            let mu = spec.mean();
            let mut acc = model.intercept;
            for i in 0..spec.dim() {
                let xi = if subset.contains(i) { x[i] } else { mu[i] };
                acc += model.coefficients[i] * xi;
            }
            Ok(acc)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Link;
    use ndarray::array;

    fn pair_spec(rho: f64) -> GaussianSpec {
        let cov = array![[1.0, 0.0, 0.0], [0.0, 1.0, rho], [0.0, rho, 1.0]];
        GaussianSpec::new(Array1::zeros(3), cov).unwrap()
    }

    #[test]
    fn independent_conditioning_reveals_only_the_member() {
        let spec = GaussianSpec::new(Array1::zeros(3), Array2::eye(3)).unwrap();
        let x = array![1.0, 1.0, 1.0];
        let s = FeatureSubset::new([1], 3).unwrap();
        let e = conditional_expectation(&spec, x.view(), &s).unwrap();
        assert_eq!(e, array![0.0, 1.0, 0.0]);
    }

    #[test]
    fn pair_correlation_propagates_to_the_partner() {
        // Hand value from the 2x2 Gaussian conditional: E[x3 | x2 = 1] = rho.
        let rho = 0.8;
        let spec = pair_spec(rho);
        let x = array![1.0, 1.0, 1.0];
        let s = FeatureSubset::new([1], 3).unwrap();
        let e = conditional_expectation(&spec, x.view(), &s).unwrap();
        assert!((e[0] - 0.0).abs() < 1e-14);
        assert!((e[1] - 1.0).abs() < 1e-14);
        assert!((e[2] - rho).abs() < 1e-14);
    }

    #[test]
    fn boundary_subsets_return_mean_and_sample_exactly() {
        let spec = pair_spec(0.6);
        let x = array![2.0, -1.0, 0.5];
        let empty = FeatureSubset::empty(3);
        let full = FeatureSubset::full(3);
        assert_eq!(conditional_expectation(&spec, x.view(), &empty).unwrap(), spec.mean());
        assert_eq!(conditional_expectation(&spec, x.view(), &full).unwrap(), x);
    }

    #[test]
    fn monte_carlo_kernel_estimate_agrees_with_the_formula() {
        // Independent oracle: draw from the joint and form a kernel-weighted
        // conditional mean around x_S, never touching the conditioning code.
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let rho = 0.8;
        let spec = pair_spec(rho);
        let x = array![1.0, 1.0, 1.0];
        let s = FeatureSubset::new([1], 3).unwrap();
        let formula = conditional_expectation(&spec, x.view(), &s).unwrap();

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let l = crate::linalg::psd_cholesky(spec.covariance(), 1e-12).unwrap();
        let bandwidth = 0.05f64;
        let mut weight_sum = 0.0;
        let mut acc = Array1::<f64>::zeros(3);
        for _ in 0..400_000 {
            let z: Vec<f64> =
                (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut draw = [0.0f64; 3];
            for i in 0..3 {
                for (k, zk) in z.iter().enumerate().take(i + 1) {
                    draw[i] += l[[i, k]] * zk;
                }
            }
            let dev = (draw[1] - x[1]) / bandwidth;
            let w = (-0.5 * dev * dev).exp();
            weight_sum += w;
            for i in 0..3 {
                acc[i] += w * draw[i];
            }
        }
        for i in 0..3 {
            let estimate = acc[i] / weight_sum;
            assert!(
                (estimate - formula[i]).abs() < 0.03,
                "feature {i}: kernel estimate {estimate} vs formula {}",
                formula[i]
            );
        }
    }

    #[test]
    fn coalition_values_match_hand_computation() {
        let rho = 0.5;
        let spec = pair_spec(rho);
        let model = LinearModel::new(array![1.0, 2.0, 3.0], 0.0, Link::Identity);
        let x = array![1.0, 1.0, 1.0];
        let s = FeatureSubset::new([1], 3).unwrap();
        let obs = coalition_value(&model, &spec, x.view(), &s, ValueMode::Observational).unwrap();
        assert!((obs - (2.0 + 3.0 * rho)).abs() < 1e-12);
        let int = coalition_value(&model, &spec, x.view(), &s, ValueMode::Interventional).unwrap();
        assert!((int - 2.0).abs() < 1e-12);
        let full = FeatureSubset::full(3);
        for mode in [ValueMode::Observational, ValueMode::Interventional] {
            let v = coalition_value(&model, &spec, x.view(), &full, mode).unwrap();
            assert!((v - 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_block_errors_without_ridge_and_survives_with_it() {
        // Perfectly correlated pair: Sigma_SS for S = {0, 1} is singular.
        let cov = array![[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let spec = GaussianSpec::new(Array1::zeros(3), cov).unwrap();
        let x = array![1.0, 1.0, 0.0];
        let s = FeatureSubset::new([0, 1], 3).unwrap();
        let strict = RidgePolicy { enabled: false, condition_cap: 1e12 };
        let err = conditional_expectation_with(&spec, x.view(), &s, &strict);
        assert!(matches!(err, Err(Error::SingularSubmatrix { .. })));
        let lenient = RidgePolicy::default();
        let e = conditional_expectation_with(&spec, x.view(), &s, &lenient).unwrap();
        assert!(e.iter().all(|v| v.is_finite()));
    }
}

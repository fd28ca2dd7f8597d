//! Recourse study: rank each individual's features by attribution, mean-
//! impute the top k, and watch the predicted log-odds fall.
//!
//! For a linear margin, imputing feature `i` changes the score by exactly
//! `-beta_i (x_i - mu_i)`, so ranking by the interventional attribution is
//! greedy-optimal at every k. The observational ranking can spend picks on
//! correlated features the model never reads, which is the study's point.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::attribution::{
    attribute_interventional, attribute_observational_batch, contract,
};
use crate::error::{Error, Result};
use crate::estimation::DataMatrix;
use crate::experiments::derive_seed;
use crate::experiments::synth::sample_mvn;
use crate::fitting::{fit_logistic, FitConfig};
use crate::gaussian::GaussianSpec;
use crate::model::{LinearModel, Link};
use crate::transforms::{exact_transforms, DEFAULT_EXACT_CAP};

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mean and standard deviation over individuals of the margin change after
/// imputing each individual's top-k features, for k = 1..k_max.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecourseCurve {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Curves for the three rankings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecourseStudy {
    pub k_max: usize,
    pub individuals: usize,
    pub interventional: RecourseCurve,
    pub observational: RecourseCurve,
    /// Reference ranking by `beta_i (x_i - mu_i)` descending; provably the
    /// fastest possible margin decrease, and identical to the
    /// interventional curve.
    pub optimal: RecourseCurve,
}

/// Descending order by score, ties broken by ascending feature index.
fn rank_descending(scores: ArrayView1<'_, f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b].partial_cmp(&scores[a]).expect("finite scores").then(a.cmp(&b))
    });
    order
}

/// Margin changes after cumulatively imputing the ranked features, measured
/// against the unmodified prediction.
fn imputation_deltas(
    model: &LinearModel,
    mean: ArrayView1<'_, f64>,
    x: ArrayView1<'_, f64>,
    order: &[usize],
    k_max: usize,
) -> Result<Vec<f64>> {
    let margin0 = model.margin(x)?;
    let mut modified = x.to_owned();
    let mut deltas = Vec::with_capacity(k_max);
    for &feature in order.iter().take(k_max) {
        modified[feature] = mean[feature];
        deltas.push(model.margin(modified.view())? - margin0);
    }
    Ok(deltas)
}

fn summarize(per_individual: &[Vec<f64>], k_max: usize) -> RecourseCurve {
    let count = per_individual.len() as f64;
    let mut mean = vec![0.0f64; k_max];
    for deltas in per_individual {
        for (m, d) in mean.iter_mut().zip(deltas.iter()) {
            *m += d;
        }
    }
    for m in mean.iter_mut() {
        *m /= count;
    }
    let mut std = vec![0.0f64; k_max];
    if per_individual.len() > 1 {
        for deltas in per_individual {
            for ((s, m), d) in std.iter_mut().zip(mean.iter()).zip(deltas.iter()) {
                *s += (d - m) * (d - m);
            }
        }
        for s in std.iter_mut() {
            *s = (*s / (count - 1.0)).sqrt();
        }
    }
    RecourseCurve { mean, std }
}

/// Runs the recourse protocol for every row of `data`.
///
/// Attributions are computed in both modes; features are ranked by signed
/// attribution descending (the features pushing the score up first), ties by
/// ascending index. The model must carry the `LogitMargin` link, and the
/// feature count must be within the exact-enumeration cap.
pub fn run_recourse(
    model: &LinearModel,
    spec: &GaussianSpec,
    data: &DataMatrix,
    k_max: usize,
) -> Result<RecourseStudy> {
    if model.link != Link::LogitMargin {
        return Err(Error::InvalidArgument(
            "recourse explains log-odds; the model link must be logit_margin".into(),
        ));
    }
    let n = spec.dim();
    if model.dim() != n || data.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "model {} / spec {n} / data {} feature counts differ",
            model.dim(),
            data.cols()
        )));
    }
    if k_max == 0 || k_max > n {
        return Err(Error::InvalidArgument(format!("k_max {k_max} outside 1..={n}")));
    }

    let tensor = exact_transforms(spec, DEFAULT_EXACT_CAP)?;
    let op = contract(&tensor, model)?;
    let observational = attribute_observational_batch(&op, data.values())?;
    let mean = spec.mean();

    let mut int_deltas = Vec::with_capacity(data.rows());
    let mut obs_deltas = Vec::with_capacity(data.rows());
    let mut opt_deltas = Vec::with_capacity(data.rows());
    for (row, obs) in data.values().rows().into_iter().zip(&observational) {
        let int = attribute_interventional(model, mean, row)?;
        let int_order = rank_descending(int.values.view());
        int_deltas.push(imputation_deltas(model, mean, row, &int_order, k_max)?);

        let obs_order = rank_descending(obs.values.view());
        obs_deltas.push(imputation_deltas(model, mean, row, &obs_order, k_max)?);

        // Direct greedy-optimal scores, computed without the attribution API.
        let direct =
            Array1::from_shape_fn(n, |i| model.coefficients[i] * (row[i] - mean[i]));
        let opt_order = rank_descending(direct.view());
        opt_deltas.push(imputation_deltas(model, mean, row, &opt_order, k_max)?);
    }

    Ok(RecourseStudy {
        k_max,
        individuals: data.rows(),
        interventional: summarize(&int_deltas, k_max),
        observational: summarize(&obs_deltas, k_max),
        optimal: summarize(&opt_deltas, k_max),
    })
}

/// Configuration of the synthetic recourse experiment: a credit-style
/// logistic model over features where each of the first `n_dummy` "used"
/// features has a correlated shadow feature the true model ignores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecourseConfig {
    pub n_features: usize,
    /// Number of zero-coefficient features, each paired at `rho` with one
    /// used feature. Must be at most `n_features / 2`.
    pub n_dummy: usize,
    pub rho: f64,
    pub individuals: usize,
    pub k_max: usize,
    /// L2 penalty of the logistic fit (average-loss convention).
    pub fit_penalty: f64,
    pub seed: u64,
}

impl Default for RecourseConfig {
    fn default() -> Self {
        Self {
            n_features: 10,
            n_dummy: 3,
            rho: 0.8,
            individuals: 2000,
            k_max: 10,
            fit_penalty: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecourseReport {
    pub config: RecourseConfig,
    /// True coefficients behind the simulated defaults (dummies are zero).
    pub true_coefficients: Vec<f64>,
    pub fitted_coefficients: Vec<f64>,
    pub fitted_intercept: f64,
    pub study: RecourseStudy,
}

/// The planted-dummy covariance: identity, except used feature `t` and
/// dummy feature `n_used + t` correlate at `rho` for `t < n_dummy`.
pub fn recourse_covariance(cfg: &RecourseConfig) -> Result<GaussianSpec> {
    let n = cfg.n_features;
    if cfg.n_dummy * 2 > n {
        return Err(Error::InvalidArgument(format!(
            "{} dummies need at least {} features",
            cfg.n_dummy,
            cfg.n_dummy * 2
        )));
    }
    if cfg.rho.abs() >= 1.0 {
        return Err(Error::NotPsd(format!("pair correlation needs |rho| < 1, got {}", cfg.rho)));
    }
    let n_used = n - cfg.n_dummy;
    let mut cov = Array2::<f64>::eye(n);
    for t in 0..cfg.n_dummy {
        cov[[t, n_used + t]] = cfg.rho;
        cov[[n_used + t, t]] = cfg.rho;
    }
    GaussianSpec::new(Array1::zeros(n), cov)
}

/// True model of the simulation: alternating-sign coefficients on the used
/// features, exact zeros on the dummies, and a negative intercept so
/// defaults are the minority class.
pub fn recourse_true_model(cfg: &RecourseConfig) -> LinearModel {
    let n_used = cfg.n_features - cfg.n_dummy;
    let coefficients = Array1::from_shape_fn(cfg.n_features, |j| {
        if j < n_used {
            let magnitude = 1.5 - 0.1 * j as f64;
            if j % 2 == 0 {
                magnitude
            } else {
                -magnitude
            }
        } else {
            0.0
        }
    });
    LinearModel::new(coefficients, -1.0, Link::LogitMargin)
}

/// Samples individuals, simulates default labels from the true logistic
/// model, fits a logistic regression on all features (dummies included) and
/// runs the recourse protocol on the fitted model.
pub fn run_recourse_experiment(cfg: &RecourseConfig) -> Result<RecourseReport> {
    let spec = recourse_covariance(cfg)?;
    let data = sample_mvn(&spec, cfg.individuals, derive_seed(cfg.seed, &[1]))?;
    let truth = recourse_true_model(cfg);
    let margins = truth.predict_margin(data.values())?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[2]));
    let labels = Array1::from_shape_fn(cfg.individuals, |i| {
        let p = 1.0 / (1.0 + (-margins[i]).exp());
        f64::from(rng.gen::<f64>() < p)
    });
    let fit_cfg = FitConfig {
        penalty: cfg.fit_penalty,
        tolerance: 1e-8,
        max_iterations: 200,
        ..FitConfig::default()
    };
    let fitted = fit_logistic(&data, labels.view(), &fit_cfg)?;
    let study = run_recourse(&fitted.model, &spec, &data, cfg.k_max)?;
    Ok(RecourseReport {
        config: cfg.clone(),
        true_coefficients: truth.coefficients.to_vec(),
        fitted_coefficients: fitted.model.coefficients.to_vec(),
        fitted_intercept: fitted.model.intercept,
        study,
    })
}

//! Dummy-feature study: a feature the model never reads gets zero
//! interventional attribution but real observational credit once it is
//! correlated with a used feature.

use ndarray::array;
use serde::{Deserialize, Serialize};

use crate::attribution::{
    attribute_interventional, attribute_observational, brute_force_shapley, contract,
};
use crate::conditional::ValueMode;
use crate::error::Result;
use crate::experiments::synth::{build_covariance, CorrelationPattern};
use crate::model::{LinearModel, Link};
use crate::transforms::{exact_transforms, DEFAULT_EXACT_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DummyFeatureConfig {
    /// Correlation between the used feature and the dummy, in (-1, 1).
    pub rho: f64,
    pub seed: u64,
}

impl Default for DummyFeatureConfig {
    fn default() -> Self {
        Self { rho: 0.8, seed: 0 }
    }
}

/// Attributions of the canonical two-feature instance `beta = [1, 0]`,
/// `x = [1, 1]`, `Sigma = [[1, rho], [rho, 1]]`, alongside the closed forms
/// they must match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DummyFeatureReport {
    pub config: DummyFeatureConfig,
    pub interventional: Vec<f64>,
    pub observational: Vec<f64>,
    pub brute_force_observational: Vec<f64>,
    pub expected_interventional: Vec<f64>,
    pub expected_observational: Vec<f64>,
}

pub fn run_dummy_feature(cfg: &DummyFeatureConfig) -> Result<DummyFeatureReport> {
    let pattern = CorrelationPattern::Pair { dimension: 2, rho: cfg.rho, i: 0, j: 1 };
    let spec = build_covariance(&pattern)?;
    let model = LinearModel::new(array![1.0, 0.0], 0.0, Link::Identity);
    let x = array![1.0, 1.0];

    let interventional = attribute_interventional(&model, spec.mean(), x.view())?;
    let tensor = exact_transforms(&spec, DEFAULT_EXACT_CAP)?;
    let op = contract(&tensor, &model)?;
    let observational = attribute_observational(&op, x.view())?;
    let oracle = brute_force_shapley(&model, &spec, x.view(), ValueMode::Observational)?;

    Ok(DummyFeatureReport {
        config: *cfg,
        interventional: interventional.values.to_vec(),
        observational: observational.values.to_vec(),
        brute_force_observational: oracle.values.to_vec(),
        expected_interventional: vec![1.0, 0.0],
        expected_observational: vec![1.0 - cfg.rho / 2.0, cfg.rho / 2.0],
    })
}

//! Convergence study: how correlation slows down the Monte Carlo transform
//! estimates.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::attribution::{attribute_observational, contract};
use crate::error::{Error, Result};
use crate::experiments::derive_seed;
use crate::experiments::synth::{build_covariance, CorrelationPattern};
use crate::model::{LinearModel, Link};
use crate::transforms::{exact_transforms, sampled_transforms, DEFAULT_EXACT_CAP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub beta: Vec<f64>,
    pub x: Vec<f64>,
    pub patterns: Vec<CorrelationPattern>,
    /// Strictly increasing permutation budgets.
    pub permutation_schedule: Vec<u64>,
    /// Independent sampled estimates per budget.
    pub repeats: usize,
    pub seed: u64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            beta: vec![1.0, 2.0, 3.0],
            x: vec![1.0, 1.0, 1.0],
            patterns: vec![
                CorrelationPattern::Independent { dimension: 3 },
                CorrelationPattern::Pair { dimension: 3, rho: 0.8, i: 1, j: 2 },
                CorrelationPattern::Equicorrelated { dimension: 3, rho: 0.8 },
            ],
            permutation_schedule: vec![1, 2, 4, 8, 16, 32, 64, 128],
            repeats: 20,
            seed: 0,
        }
    }
}

/// One pattern's convergence data: the exact reference attribution plus the
/// per-budget mean and standard deviation of the sampled estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternConvergence {
    pub pattern: CorrelationPattern,
    pub exact: Vec<f64>,
    /// `std[k][i]`: std of feature `i` over the repeats at schedule entry `k`.
    pub std: Vec<Vec<f64>>,
    pub mean: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: ConvergenceConfig,
    pub patterns: Vec<PatternConvergence>,
}

/// Runs the study: for each pattern and permutation budget, `repeats`
/// independently seeded sampled-transform attributions of the fixed sample,
/// summarized by their per-feature standard deviation next to the exact
/// reference values.
pub fn run_convergence(cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    if cfg.repeats < 2 {
        return Err(Error::InvalidArgument("need at least 2 repeats for a std".into()));
    }
    if cfg.permutation_schedule.is_empty() {
        return Err(Error::InvalidArgument("empty permutation schedule".into()));
    }
    if !cfg.permutation_schedule.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument(
            "permutation schedule must be strictly increasing".into(),
        ));
    }
    let n = cfg.beta.len();
    if cfg.x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "beta has {n} entries but x has {}",
            cfg.x.len()
        )));
    }
    let model = LinearModel::new(Array1::from(cfg.beta.clone()), 0.0, Link::Identity);
    let x = Array1::from(cfg.x.clone());

    let mut patterns = Vec::with_capacity(cfg.patterns.len());
    for (pi, pattern) in cfg.patterns.iter().enumerate() {
        if pattern.dimension() != n {
            return Err(Error::DimensionMismatch(format!(
                "pattern {} has dimension {} but beta has {n}",
                pattern.label(),
                pattern.dimension()
            )));
        }
        let spec = build_covariance(pattern)?;
        let exact_tensor = exact_transforms(&spec, DEFAULT_EXACT_CAP)?;
        let exact_op = contract(&exact_tensor, &model)?;
        let exact = attribute_observational(&exact_op, x.view())?.values.to_vec();

        let mut std_rows = Vec::with_capacity(cfg.permutation_schedule.len());
        let mut mean_rows = Vec::with_capacity(cfg.permutation_schedule.len());
        for (ki, &k) in cfg.permutation_schedule.iter().enumerate() {
            let mut estimates = Vec::with_capacity(cfg.repeats);
            for rep in 0..cfg.repeats {
                let seed = derive_seed(cfg.seed, &[pi as u64, ki as u64, rep as u64]);
                let tensor = sampled_transforms(&spec, k, seed, false)?;
                let op = contract(&tensor, &model)?;
                estimates.push(attribute_observational(&op, x.view())?.values);
            }
            let (mean, std) = column_stats(&estimates);
            mean_rows.push(mean);
            std_rows.push(std);
        }
        patterns.push(PatternConvergence {
            pattern: pattern.clone(),
            exact,
            std: std_rows,
            mean: mean_rows,
        });
    }
    Ok(ConvergenceReport { config: cfg.clone(), patterns })
}

/// Per-coordinate mean and sample standard deviation over a set of vectors.
fn column_stats(estimates: &[Array1<f64>]) -> (Vec<f64>, Vec<f64>) {
    let reps = estimates.len();
    let n = estimates[0].len();
    let mut mean = vec![0.0f64; n];
    for e in estimates {
        for (m, v) in mean.iter_mut().zip(e.iter()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= reps as f64;
    }
    let mut std = vec![0.0f64; n];
    for e in estimates {
        for ((s, m), v) in std.iter_mut().zip(mean.iter()).zip(e.iter()) {
            *s += (v - m) * (v - m);
        }
    }
    for s in std.iter_mut() {
        *s = (*s / (reps as f64 - 1.0)).sqrt();
    }
    (mean, std)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ConvergenceConfig {
        ConvergenceConfig {
            permutation_schedule: vec![1, 4],
            repeats: 8,
            seed: 7,
            ..ConvergenceConfig::default()
        }
    }

    #[test]
    fn independent_pattern_has_exactly_zero_std() {
        let cfg = ConvergenceConfig {
            patterns: vec![CorrelationPattern::Independent { dimension: 3 }],
            ..small_config()
        };
        let report = run_convergence(&cfg).unwrap();
        for row in &report.patterns[0].std {
            for &s in row {
                assert_eq!(s, 0.0);
            }
        }
        for (got, want) in report.patterns[0].exact.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn pair_pattern_keeps_the_independent_feature_noiseless() {
        let cfg = ConvergenceConfig {
            patterns: vec![CorrelationPattern::Pair { dimension: 3, rho: 0.8, i: 1, j: 2 }],
            ..small_config()
        };
        let report = run_convergence(&cfg).unwrap();
        for row in &report.patterns[0].std {
            assert_eq!(row[0], 0.0, "feature 1 marginal is subset-independent");
            assert!(row[1] > 0.0);
            assert!(row[2] > 0.0);
        }
    }

    #[test]
    fn report_is_reproducible_for_a_fixed_seed() {
        let cfg = small_config();
        let a = run_convergence(&cfg).unwrap();
        let b = run_convergence(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn schedule_must_increase() {
        let cfg = ConvergenceConfig {
            permutation_schedule: vec![4, 4],
            ..small_config()
        };
        assert!(run_convergence(&cfg).is_err());
    }
}

//! Synthetic feature distributions and labels for the studies.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::DataMatrix;
use crate::gaussian::GaussianSpec;
use crate::linalg::psd_cholesky;

/// Correlation structure of a zero-mean, unit-variance synthetic
/// distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrelationPattern {
    /// `Sigma = I`.
    Independent { dimension: usize },
    /// `Sigma = I` except `Sigma_ij = Sigma_ji = rho` for one pair.
    Pair { dimension: usize, rho: f64, i: usize, j: usize },
    /// `Sigma_ij = rho` everywhere off the diagonal.
    Equicorrelated { dimension: usize, rho: f64 },
    /// Disjoint contiguous blocks of `block_size`, equicorrelated at `rho`
    /// within each block; the final block may be shorter.
    Block { dimension: usize, rho: f64, block_size: usize },
}

impl CorrelationPattern {
    pub fn dimension(&self) -> usize {
        match *self {
            CorrelationPattern::Independent { dimension }
            | CorrelationPattern::Pair { dimension, .. }
            | CorrelationPattern::Equicorrelated { dimension, .. }
            | CorrelationPattern::Block { dimension, .. } => dimension,
        }
    }

    /// Short name for report rows.
    pub fn label(&self) -> String {
        match self {
            CorrelationPattern::Independent { .. } => "independent".into(),
            CorrelationPattern::Pair { rho, i, j, .. } => format!("pair(rho={rho},{i},{j})"),
            CorrelationPattern::Equicorrelated { rho, .. } => {
                format!("equicorrelated(rho={rho})")
            }
            CorrelationPattern::Block { rho, block_size, .. } => {
                format!("block(rho={rho},size={block_size})")
            }
        }
    }
}

fn equicorrelated_check(rho: f64, size: usize, what: &str) -> Result<()> {
    if size >= 2 {
        let lower = -1.0 / (size as f64 - 1.0);
        if rho <= lower || rho > 1.0 {
            return Err(Error::NotPsd(format!(
                "{what} of size {size} needs rho in ({lower}, 1], got {rho}"
            )));
        }
    }
    Ok(())
}

/// Zero-mean Gaussian spec with the pattern's covariance.
pub fn build_covariance(pattern: &CorrelationPattern) -> Result<GaussianSpec> {
    let n = pattern.dimension();
    if n == 0 {
        return Err(Error::InvalidArgument("pattern dimension must be positive".into()));
    }
    let mut cov = Array2::<f64>::eye(n);
    match *pattern {
        CorrelationPattern::Independent { .. } => {}
        CorrelationPattern::Pair { rho, i, j, .. } => {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidArgument(format!(
                    "pair indices ({i}, {j}) invalid for dimension {n}"
                )));
            }
            if rho.abs() >= 1.0 {
                return Err(Error::NotPsd(format!("pair correlation needs |rho| < 1, got {rho}")));
            }
            cov[[i, j]] = rho;
            cov[[j, i]] = rho;
        }
        CorrelationPattern::Equicorrelated { rho, .. } => {
            equicorrelated_check(rho, n, "equicorrelated pattern")?;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        cov[[i, j]] = rho;
                    }
                }
            }
        }
        CorrelationPattern::Block { rho, block_size, .. } => {
            if block_size == 0 {
                return Err(Error::InvalidArgument("block size must be positive".into()));
            }
            let mut start = 0;
            while start < n {
                let end = (start + block_size).min(n);
                equicorrelated_check(rho, end - start, "block")?;
                for i in start..end {
                    for j in start..end {
                        if i != j {
                            cov[[i, j]] = rho;
                        }
                    }
                }
                start = end;
            }
        }
    }
    GaussianSpec::new(Array1::zeros(n), cov)
}

/// Draws `count` samples `x = mu + L z` with a PSD-tolerant Cholesky factor
/// of the covariance (diagonal jitter `1e-12 trace/N` is added once if the
/// factorization fails). Deterministic for a given seed: draws are consumed
/// row by row, feature by feature.
pub fn sample_mvn(spec: &GaussianSpec, count: usize, seed: u64) -> Result<DataMatrix> {
    let n = spec.dim();
    let cov = spec.covariance();
    let l = match psd_cholesky(cov, 1e-12) {
        Some(l) => l,
        None => {
            let jitter = 1e-12 * cov.diag().sum() / n as f64;
            let mut jittered = cov.to_owned();
            for i in 0..n {
                jittered[[i, i]] += jitter;
            }
            psd_cholesky(jittered.view(), 1e-12).ok_or(Error::FactorizationFailed)?
        }
    };
    let mu = spec.mean();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Array2::<f64>::zeros((count, n));
    let mut z = vec![0.0f64; n];
    for mut row in values.rows_mut() {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        for i in 0..n {
            let mut acc = mu[i];
            for (k, zk) in z.iter().enumerate().take(i + 1) {
                acc += l[[i, k]] * zk;
            }
            row[i] = acc;
        }
    }
    DataMatrix::new(values, None)
}

/// Label generator: the sum of the causal features plus Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLabelSpec {
    /// Sorted causal feature indices.
    pub causal_set: Vec<usize>,
    pub noise_std: f64,
}

impl SyntheticLabelSpec {
    pub fn new(mut causal_set: Vec<usize>, noise_std: f64) -> Result<Self> {
        if noise_std < 0.0 {
            return Err(Error::InvalidArgument("noise_std must be non-negative".into()));
        }
        causal_set.sort_unstable();
        causal_set.dedup();
        Ok(Self { causal_set, noise_std })
    }

    /// Standard deviation of the noiseless label under `spec`:
    /// `sqrt(c' Sigma c)` for the causal indicator `c`.
    pub fn signal_std(&self, spec: &GaussianSpec) -> f64 {
        let cov = spec.covariance();
        let mut var = 0.0;
        for &i in &self.causal_set {
            for &j in &self.causal_set {
                var += cov[[i, j]];
            }
        }
        var.max(0.0).sqrt()
    }

    /// `y = sum_{i in causal} x_i + eps`, `eps ~ N(0, noise_std^2)`.
    pub fn labels(&self, data: &DataMatrix, seed: u64) -> Result<Array1<f64>> {
        let n = data.cols();
        if let Some(&max) = self.causal_set.last() {
            if max >= n {
                return Err(Error::InvalidArgument(format!(
                    "causal feature {max} out of range for {n} features"
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = data.values();
        let mut y = Array1::<f64>::zeros(data.rows());
        for (r, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &c in &self.causal_set {
                acc += values[[r, c]];
            }
            let noise: f64 = StandardNormal.sample(&mut rng);
            *yi = acc + self.noise_std * noise;
        }
        Ok(y)
    }
}

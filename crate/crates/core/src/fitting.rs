//! Model fitting: OLS/ridge/Lasso/Elastic Net by cyclic coordinate descent
//! and L2-penalized logistic regression by damped Newton.
//!
//! The elastic-net objective is the glmnet-style
//!
//! ```text
//! (1/2M) ||y - X beta - b||^2 + penalty (l1_ratio ||beta||_1
//!                                        + (1 - l1_ratio)/2 ||beta||_2^2)
//! ```
//!
//! with the intercept unpenalized. `l1_ratio = 1` is the Lasso, `0` is
//! ridge. The logistic loss is the average negative log-likelihood plus
//! `penalty/2 ||beta||^2`, again leaving the intercept unpenalized.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::DataMatrix;
use crate::linalg::SpdFactor;
use crate::model::{LinearModel, Link};

/// Above this feature count the coordinate descent switches from
/// precomputed Gram updates to naive residual updates.
pub const GRAM_LIMIT: usize = 2000;

/// Coefficient norm beyond which an unpenalized logistic fit is declared
/// separable.
const SEPARATION_NORM: f64 = 1e6;
/// Margin at which the sigmoid saturates past any realistic tolerance. An
/// unpenalized fit whose samples are all this far on the correct side has
/// no finite maximizer: the coefficients grow without bound as the
/// tolerance shrinks.
const SEPARATION_MARGIN: f64 = 13.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Penalty strength, `>= 0`.
    pub penalty: f64,
    /// Mix between L1 (`1.0`, Lasso) and L2 (`0.0`, ridge). Ignored by the
    /// logistic fit, which is L2-only.
    pub l1_ratio: f64,
    pub max_iterations: usize,
    /// Convergence tolerance: max coefficient change per sweep for the
    /// elastic net, gradient norm for the logistic fit.
    pub tolerance: f64,
    /// Z-score columns internally before solving; coefficients are mapped
    /// back to the input coordinates either way.
    pub standardize: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            penalty: 0.0,
            l1_ratio: 1.0,
            max_iterations: 10_000,
            tolerance: 1e-7,
            standardize: false,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if self.penalty < 0.0 || !self.penalty.is_finite() {
            return Err(Error::InvalidArgument(format!("penalty {} < 0", self.penalty)));
        }
        if !(0.0..=1.0).contains(&self.l1_ratio) {
            return Err(Error::InvalidArgument(format!(
                "l1_ratio {} outside [0, 1]",
                self.l1_ratio
            )));
        }
        if self.tolerance <= 0.0 {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// A fitted model plus convergence diagnostics. A fit that ran out of
/// sweeps is still returned, flagged with `converged = false`.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub model: LinearModel,
    pub converged: bool,
    pub iterations: usize,
    /// Elastic net: penalized objective after each sweep (non-increasing).
    /// Logistic: gradient norm after each Newton step.
    pub progress: Vec<f64>,
}

fn check_labels(data: &DataMatrix, y: ArrayView1<'_, f64>) -> Result<()> {
    if y.len() != data.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} rows",
            y.len(),
            data.rows()
        )));
    }
    for (i, v) in y.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteInput { row: i, col: 0 });
        }
    }
    Ok(())
}

/// Centered (and optionally scaled) design, with the maps back to input
/// coordinates.
struct Prepared {
    xc: Array2<f64>,
    x_mean: Array1<f64>,
    x_scale: Array1<f64>,
}

fn prepare(data: &DataMatrix, standardize: bool) -> Prepared {
    let (x_mean, x_std) = data.column_moments();
    let n = data.cols();
    let x_scale = Array1::from_shape_fn(n, |j| {
        if standardize && x_std[j] > 0.0 {
            x_std[j]
        } else {
            1.0
        }
    });
    let mut xc = data.values().to_owned();
    for j in 0..n {
        let mu = x_mean[j];
        let s = x_scale[j];
        xc.column_mut(j).mapv_inplace(|v| (v - mu) / s);
    }
    Prepared { xc, x_mean, x_scale }
}

impl Prepared {
    /// Maps internal coefficients back to input coordinates.
    fn to_model(&self, beta_internal: ArrayView1<'_, f64>, y_mean: f64, link: Link) -> LinearModel {
        let n = beta_internal.len();
        let coefficients = Array1::from_shape_fn(n, |j| beta_internal[j] / self.x_scale[j]);
        let intercept = y_mean - coefficients.dot(&self.x_mean);
        LinearModel::new(coefficients, intercept, link)
    }
}

fn soft_threshold(v: f64, threshold: f64) -> f64 {
    if v > threshold {
        v - threshold
    } else if v < -threshold {
        v + threshold
    } else {
        0.0
    }
}

struct CdOutcome {
    beta: Array1<f64>,
    converged: bool,
    sweeps: usize,
    objective_path: Vec<f64>,
}

/// Cyclic coordinate descent on the centered problem, warm-startable.
fn coordinate_descent(
    xc: &Array2<f64>,
    yc: &Array1<f64>,
    gram: Option<&Array2<f64>>,
    cfg: &FitConfig,
    beta0: Array1<f64>,
) -> CdOutcome {
    let m = xc.nrows() as f64;
    let n = xc.ncols();
    let l1 = cfg.penalty * cfg.l1_ratio;
    let l2 = cfg.penalty * (1.0 - cfg.l1_ratio);
    let mut beta = beta0;
    let yty = yc.dot(yc);
    let xty = xc.t().dot(yc);
    let col_norms: Array1<f64> = match gram {
        Some(g) => g.diag().to_owned(),
        None => Array1::from_shape_fn(n, |j| {
            let col = xc.column(j);
            col.dot(&col)
        }),
    };

    // Gram path keeps q = G beta up to date; naive path keeps the residual.
    let mut q = gram.map(|g| g.dot(&beta));
    let mut residual = if gram.is_none() {
        Some(yc - &xc.dot(&beta))
    } else {
        None
    };

    let mut objective_path = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < cfg.max_iterations {
        let mut max_delta = 0.0f64;
        for j in 0..n {
            if col_norms[j] == 0.0 {
                continue;
            }
            let rho = match (&q, &residual) {
                (Some(q), _) => (xty[j] - q[j] + col_norms[j] * beta[j]) / m,
                (_, Some(r)) => xc.column(j).dot(r) / m + col_norms[j] / m * beta[j],
                _ => unreachable!(),
            };
            let new = soft_threshold(rho, l1) / (col_norms[j] / m + l2);
            let delta = new - beta[j];
            if delta != 0.0 {
                if let Some(q) = &mut q {
                    let g = gram.expect("gram present when q is");
                    ndarray::Zip::from(q).and(g.column(j)).for_each(|qi, &gij| {
                        *qi += delta * gij;
                    });
                }
                if let Some(r) = &mut residual {
                    ndarray::Zip::from(r).and(xc.column(j)).for_each(|ri, &xij| {
                        *ri -= delta * xij;
                    });
                }
                beta[j] = new;
            }
            max_delta = max_delta.max(delta.abs());
        }
        sweeps += 1;
        let rss = match (&q, &residual) {
            (Some(q), _) => yty - 2.0 * xty.dot(&beta) + beta.dot(q),
            (_, Some(r)) => r.dot(r),
            _ => unreachable!(),
        };
        let l1_norm: f64 = beta.iter().map(|b| b.abs()).sum();
        let l2_norm2: f64 = beta.dot(&beta);
        objective_path.push(rss / (2.0 * m) + l1 * l1_norm + 0.5 * l2 * l2_norm2);
        if max_delta < cfg.tolerance {
            converged = true;
            break;
        }
    }
    CdOutcome { beta, converged, sweeps, objective_path }
}

/// Fits an elastic-net (or OLS/ridge/Lasso) regression by cyclic coordinate
/// descent with soft-thresholding. The intercept is unpenalized; a fit that
/// hits the sweep limit is returned with `converged = false`.
pub fn fit_elastic_net(
    data: &DataMatrix,
    y: ArrayView1<'_, f64>,
    cfg: &FitConfig,
) -> Result<FittedModel> {
    cfg.validate()?;
    check_labels(data, y)?;
    if data.rows() == 0 || data.cols() == 0 {
        return Err(Error::InvalidArgument("empty design matrix".into()));
    }
    let prep = prepare(data, cfg.standardize);
    let y_mean = y.mean().expect("nonempty labels");
    let yc = &y - y_mean;
    let gram = (data.cols() <= GRAM_LIMIT).then(|| prep.xc.t().dot(&prep.xc));
    let out = coordinate_descent(&prep.xc, &yc, gram.as_ref(), cfg, Array1::zeros(data.cols()));
    Ok(FittedModel {
        model: prep.to_model(out.beta.view(), y_mean, Link::Identity),
        converged: out.converged,
        iterations: out.sweeps,
        progress: out.objective_path,
    })
}

/// Maximum violation of the elastic-net KKT conditions by `model` on
/// `(data, y)` under `cfg`, evaluated in the solver's internal coordinates.
/// Small values certify convergence independently of the descent path.
pub fn elastic_net_kkt_residual(
    data: &DataMatrix,
    y: ArrayView1<'_, f64>,
    model: &LinearModel,
    cfg: &FitConfig,
) -> Result<f64> {
    check_labels(data, y)?;
    let prep = prepare(data, cfg.standardize);
    let y_mean = y.mean().expect("nonempty labels");
    let yc = &y - y_mean;
    let n = data.cols();
    let beta_internal =
        Array1::from_shape_fn(n, |j| model.coefficients[j] * prep.x_scale[j]);
    let m = data.rows() as f64;
    let residual = &yc - &prep.xc.dot(&beta_internal);
    let l1 = cfg.penalty * cfg.l1_ratio;
    let l2 = cfg.penalty * (1.0 - cfg.l1_ratio);
    let mut worst = 0.0f64;
    for j in 0..n {
        let grad = -prep.xc.column(j).dot(&residual) / m + l2 * beta_internal[j];
        let violation = if beta_internal[j] != 0.0 {
            (grad + l1 * beta_internal[j].signum()).abs()
        } else {
            (grad.abs() - l1).max(0.0)
        };
        worst = worst.max(violation);
    }
    Ok(worst)
}

/// Average penalized logistic loss at `(beta, intercept)`.
pub fn logistic_loss(
    data: &DataMatrix,
    y: ArrayView1<'_, f64>,
    beta: ArrayView1<'_, f64>,
    intercept: f64,
    penalty: f64,
) -> f64 {
    let z = data.values().dot(&beta) + intercept;
    let m = data.rows() as f64;
    let mut loss = 0.0;
    for (zi, yi) in z.iter().zip(y.iter()) {
        // log(1 + e^z) - y z, computed stably on both tails.
        let log1pe = if *zi > 0.0 { zi + (-zi).exp().ln_1p() } else { zi.exp().ln_1p() };
        loss += log1pe - yi * zi;
    }
    loss / m + 0.5 * penalty * beta.dot(&beta)
}

/// Gradient of [`logistic_loss`] with respect to `(beta, intercept)`.
pub fn logistic_gradient(
    data: &DataMatrix,
    y: ArrayView1<'_, f64>,
    beta: ArrayView1<'_, f64>,
    intercept: f64,
    penalty: f64,
) -> (Array1<f64>, f64) {
    let z = data.values().dot(&beta) + intercept;
    let m = data.rows() as f64;
    let mut diff = Array1::<f64>::zeros(data.rows());
    for (d, (zi, yi)) in diff.iter_mut().zip(z.iter().zip(y.iter())) {
        let p = 1.0 / (1.0 + (-zi).exp());
        *d = p - yi;
    }
    let grad_beta = data.values().t().dot(&diff) / m + &(penalty * &beta);
    let grad_intercept = diff.sum() / m;
    (grad_beta, grad_intercept)
}

/// Fits an L2-penalized logistic regression by damped Newton iterations
/// until the gradient norm drops below `cfg.tolerance`. Labels must be
/// exactly 0 or 1. With `penalty = 0` and separable data the coefficients
/// diverge; that is detected and reported as [`Error::SeparableData`].
pub fn fit_logistic(
    data: &DataMatrix,
    y: ArrayView1<'_, f64>,
    cfg: &FitConfig,
) -> Result<FittedModel> {
    cfg.validate()?;
    check_labels(data, y)?;
    for (i, v) in y.iter().enumerate() {
        if *v != 0.0 && *v != 1.0 {
            return Err(Error::InvalidArgument(format!(
                "classification label at row {i} is {v}, expected 0 or 1"
            )));
        }
    }
    let prep = prepare(data, cfg.standardize);
    let m = data.rows();
    let n = data.cols();
    let mf = m as f64;
    // Work on the centered design; fold the shift back at the end.
    let centered = DataMatrix::new(prep.xc.clone(), None)?;

    let mut beta = Array1::<f64>::zeros(n);
    let mut intercept = 0.0f64;
    let mut progress = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        let (grad_beta, grad_b) = logistic_gradient(
            &centered,
            y,
            beta.view(),
            intercept,
            cfg.penalty,
        );
        let grad_norm = (grad_beta.dot(&grad_beta) + grad_b * grad_b).sqrt();
        progress.push(grad_norm);
        if grad_norm < cfg.tolerance {
            converged = true;
            break;
        }
        if cfg.penalty == 0.0 {
            if beta.dot(&beta).sqrt() > SEPARATION_NORM {
                return Err(Error::SeparableData);
            }
            let z = prep.xc.dot(&beta) + intercept;
            let all_saturated = z
                .iter()
                .zip(y.iter())
                .all(|(zi, yi)| (2.0 * yi - 1.0) * zi > SEPARATION_MARGIN);
            if all_saturated {
                return Err(Error::SeparableData);
            }
        }

        // Newton system on the (beta, intercept) block.
        let z = prep.xc.dot(&beta) + intercept;
        let weights = z.mapv(|zi| {
            let p = 1.0 / (1.0 + (-zi).exp());
            (p * (1.0 - p)).max(1e-12)
        });
        let mut hessian = Array2::<f64>::zeros((n + 1, n + 1));
        let weighted = &prep.xc * &weights.view().insert_axis(Axis(1));
        let hxx = prep.xc.t().dot(&weighted) / mf;
        hessian.slice_mut(ndarray::s![..n, ..n]).assign(&hxx);
        for j in 0..n {
            hessian[[j, j]] += cfg.penalty;
            let hb = weighted.column(j).sum() / mf;
            hessian[[j, n]] = hb;
            hessian[[n, j]] = hb;
        }
        hessian[[n, n]] = weights.sum() / mf;

        let mut grad_full = Array1::<f64>::zeros(n + 1);
        grad_full.slice_mut(ndarray::s![..n]).assign(&grad_beta);
        grad_full[n] = grad_b;

        let step = match SpdFactor::new(hessian.view()) {
            Some(f) => {
                let rhs =
                    Array2::from_shape_fn((n + 1, 1), |(i, _)| -grad_full[i]);
                f.solve(rhs.view()).column(0).to_owned()
            }
            // Singular Hessian (possible at penalty = 0): fall back to a
            // plain gradient step.
            None => -&grad_full,
        };

        // Halving line search on the penalized loss.
        let loss0 = logistic_loss(&centered, y, beta.view(), intercept, cfg.penalty);
        let mut scale = 1.0f64;
        let mut accepted = false;
        for _ in 0..40 {
            let cand_beta = &beta + &(scale * &step.slice(ndarray::s![..n]));
            let cand_b = intercept + scale * step[n];
            let loss = logistic_loss(&centered, y, cand_beta.view(), cand_b, cfg.penalty);
            if loss <= loss0 {
                beta = cand_beta;
                intercept = cand_b;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            // No descent direction at floating-point resolution.
            converged = grad_norm < cfg.tolerance.max(1e-6);
            break;
        }
        iterations += 1;
    }
    if !converged {
        return Err(Error::NotConverged {
            iterations,
            last_change: progress.last().copied().unwrap_or(f64::NAN),
        });
    }
    // Undo the centering/scaling: the centered model used x~ = (x - mu)/s.
    let coefficients = Array1::from_shape_fn(n, |j| beta[j] / prep.x_scale[j]);
    let shift: f64 = coefficients.dot(&prep.x_mean);
    Ok(FittedModel {
        model: LinearModel::new(coefficients, intercept - shift, Link::LogitMargin),
        converged,
        iterations,
        progress,
    })
}

/// Result of a cross-validated penalty search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySearch {
    /// Grid in descending order.
    pub grid: Vec<f64>,
    /// Mean validation MSE per grid point.
    pub cv_mse: Vec<f64>,
    pub chosen: f64,
}

/// Log-spaced penalty grid spanning `[1e-4, 1e1]` times the largest
/// absolute feature-label covariance, in descending order.
pub fn default_penalty_grid(data: &DataMatrix, y: ArrayView1<'_, f64>, points: usize) -> Vec<f64> {
    let m = data.rows() as f64;
    let y_mean = y.mean().unwrap_or(0.0);
    let (x_mean, _) = data.column_moments();
    let mut max_cov = 0.0f64;
    for j in 0..data.cols() {
        let col = data.values().column(j).to_owned();
        let cov: f64 = col
            .iter()
            .zip(y.iter())
            .map(|(x, yv)| (x - x_mean[j]) * (yv - y_mean))
            .sum::<f64>()
            / (m - 1.0).max(1.0);
        max_cov = max_cov.max(cov.abs());
    }
    let scale = if max_cov > 0.0 { max_cov } else { 1.0 };
    let (lo, hi) = (1e-4 * scale, 1e1 * scale);
    let points = points.max(2);
    (0..points)
        .map(|k| {
            let t = k as f64 / (points - 1) as f64;
            // Descending: start at hi.
            (hi.ln() + t * (lo.ln() - hi.ln())).exp()
        })
        .collect()
}

/// K-fold cross-validation over a descending penalty grid with warm starts,
/// choosing the penalty with the smallest mean validation MSE (the largest
/// such penalty on ties). Fold `k` holds out rows with `index % folds == k`.
pub fn select_penalty_by_cv(
    data: &DataMatrix,
    y: ArrayView1<'_, f64>,
    base: &FitConfig,
    folds: usize,
    grid: &[f64],
) -> Result<PenaltySearch> {
    base.validate()?;
    check_labels(data, y)?;
    if folds < 2 || folds > data.rows() {
        return Err(Error::InvalidArgument(format!(
            "{folds} folds for {} rows",
            data.rows()
        )));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty penalty grid".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(|a, b| b.partial_cmp(a).expect("finite penalties"));

    let n = data.cols();
    let mut sq_err = vec![0.0f64; grid.len()];
    for fold in 0..folds {
        let train_rows: Vec<usize> =
            (0..data.rows()).filter(|i| i % folds != fold).collect();
        let valid_rows: Vec<usize> =
            (0..data.rows()).filter(|i| i % folds == fold).collect();
        let train = DataMatrix::new(
            data.values().select(Axis(0), &train_rows),
            None,
        )?;
        let y_train: Array1<f64> = train_rows.iter().map(|&i| y[i]).collect();
        let prep = prepare(&train, base.standardize);
        let y_mean = y_train.mean().expect("nonempty fold");
        let yc = &y_train - y_mean;
        let gram = (n <= GRAM_LIMIT).then(|| prep.xc.t().dot(&prep.xc));

        let mut beta = Array1::<f64>::zeros(n);
        for (gi, &penalty) in grid.iter().enumerate() {
            let cfg = FitConfig { penalty, ..*base };
            let out = coordinate_descent(&prep.xc, &yc, gram.as_ref(), &cfg, beta);
            beta = out.beta;
            for &row in &valid_rows {
                let mut pred = y_mean;
                for j in 0..n {
                    pred += (data.values()[[row, j]] - prep.x_mean[j]) / prep.x_scale[j]
                        * beta[j];
                }
                let err = pred - y[row];
                sq_err[gi] += err * err;
            }
        }
    }
    let total_rows = data.rows() as f64;
    let cv_mse: Vec<f64> = sq_err.iter().map(|s| s / total_rows).collect();
    let mut best = 0;
    for (i, &mse) in cv_mse.iter().enumerate() {
        if mse < cv_mse[best] {
            best = i;
        }
    }
    Ok(PenaltySearch { chosen: grid[best], grid, cv_mse })
}

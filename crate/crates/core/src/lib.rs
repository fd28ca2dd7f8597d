//! Exact and Monte Carlo Shapley attributions for linear models under a
//! Gaussian data model, with the estimation, fitting, experiment and
//! persistence machinery needed to study them.
//!
//! The interventional attribution of a linear model has the closed form
//! `phi_i = beta_i (x_i - mu_i)`. The observational attribution conditions
//! on the known features instead and respects correlations; it is computed
//! here by accumulating per-feature transform matrices, either exactly over
//! all coalitions or by sampling feature permutations, after which every
//! sample and every model over the same distribution is explained by a few
//! matrix-vector products.

pub mod attribution;
pub mod conditional;
pub mod estimation;
pub mod experiments;
pub mod fitting;
pub mod error;
pub mod gaussian;
mod linalg;
pub mod model;
pub mod subset;
pub mod transforms;

pub use attribution::{
    attribute_interventional, attribute_interventional_batch, attribute_observational,
    attribute_observational_batch, brute_force_shapley, contract, Attribution, AttributionMode,
    AttributionOperator, BRUTE_FORCE_CAP,
};
pub use conditional::{coalition_value, conditional_expectation, RidgePolicy, ValueMode};
pub use error::{Error, Result};
pub use gaussian::GaussianSpec;
pub use model::{LinearModel, Link};
pub use subset::FeatureSubset;
pub use transforms::{
    exact_transforms, sampled_transforms, shapley_weight, TensorMode, TransformTensor,
    DEFAULT_EXACT_CAP,
};

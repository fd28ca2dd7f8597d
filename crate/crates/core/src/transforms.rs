//! Per-feature transform matrices.
//!
//! The exponential part of the observational attribution is isolated into a
//! pair of matrices per feature, `(T_mu[i], T_x[i])`, accumulated either by
//! enumerating every coalition once (exact) or by walking sampled feature
//! permutations (Monte Carlo). Once built, a tensor explains any number of
//! samples and any model over the same distribution in a few matrix-vector
//! products.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditional::{accumulate_operators, materialize_operators, subset_gain, RidgePolicy};
use crate::error::{Error, Result};
use crate::gaussian::GaussianSpec;

/// Default cap on exact enumeration; beyond this the caller must opt in
/// explicitly (2^N subsets add up fast).
pub const DEFAULT_EXACT_CAP: usize = 20;
/// Hard limit of the bitmask enumeration.
pub const MASK_LIMIT: usize = 63;

/// How a tensor was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorMode {
    Exact,
    Sampled,
}

/// Per-feature transform pairs plus provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformTensor {
    t_mu: Vec<Array2<f64>>,
    t_x: Vec<Array2<f64>>,
    mode: TensorMode,
    permutation_count: u64,
    seed: Option<u64>,
    fingerprint: [u8; 32],
    mean: Array1<f64>,
    ridge_events: u64,
}

impl TransformTensor {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        t_mu: Vec<Array2<f64>>,
        t_x: Vec<Array2<f64>>,
        mode: TensorMode,
        permutation_count: u64,
        seed: Option<u64>,
        fingerprint: [u8; 32],
        mean: Array1<f64>,
        ridge_events: u64,
    ) -> Self {
        debug_assert_eq!(t_mu.len(), mean.len());
        debug_assert_eq!(t_x.len(), mean.len());
        Self { t_mu, t_x, mode, permutation_count, seed, fingerprint, mean, ridge_events }
    }

    /// Number of features.
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `T_mu[i]`, the matrix applied to the distribution mean for feature `i`.
    pub fn t_mu(&self, i: usize) -> &Array2<f64> {
        &self.t_mu[i]
    }

    /// `T_x[i]`, the matrix applied to the explained sample for feature `i`.
    pub fn t_x(&self, i: usize) -> &Array2<f64> {
        &self.t_x[i]
    }

    pub fn mode(&self) -> TensorMode {
        self.mode
    }

    /// Number of permutation walks averaged into a sampled tensor; 0 for exact.
    pub fn permutation_count(&self) -> u64 {
        self.permutation_count
    }

    /// RNG seed of a sampled tensor; `None` for exact.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Fingerprint of the [`GaussianSpec`] the tensor was built from.
    pub fn fingerprint(&self) -> &[u8; 32] {
        &self.fingerprint
    }

    /// Mean of the distribution the tensor was built from.
    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    /// How many subset solves needed the diagonal ridge fallback.
    pub fn ridge_events(&self) -> u64 {
        self.ridge_events
    }
}

/// The combinatorial Shapley weight `|S|! (n - 1 - |S|)! / n!` of a subset
/// that excludes the feature being attributed. Computed as
/// `1 / (n * C(n-1, |S|))`, which is exact in f64 for every `n` this crate
/// enumerates.
pub fn shapley_weight(subset_size: usize, n: usize) -> f64 {
    debug_assert!(n >= 1, "weight needs at least one player");
    debug_assert!(subset_size < n, "subset must exclude the attributed feature");
    1.0 / (n as f64 * binomial(n - 1, subset_size))
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0f64;
    for i in 1..=k {
        c = c * (n - k + i) as f64 / i as f64;
    }
    c
}

struct Partial {
    t_mu: Vec<Array2<f64>>,
    t_x: Vec<Array2<f64>>,
    ridge_events: u64,
}

impl Partial {
    fn zeros(n: usize) -> Self {
        Self {
            t_mu: vec![Array2::zeros((n, n)); n],
            t_x: vec![Array2::zeros((n, n)); n],
            ridge_events: 0,
        }
    }

    fn absorb(&mut self, other: &Partial) {
        for i in 0..self.t_mu.len() {
            self.t_mu[i] += &other.t_mu[i];
            self.t_x[i] += &other.t_x[i];
        }
        self.ridge_events += other.ridge_events;
    }
}

/// Splits `0..total` into at most `max_chunks` contiguous ranges. The split
/// depends only on `total`, so reductions over the chunks are reproducible
/// regardless of how many workers execute them.
fn chunk_ranges(total: u64, max_chunks: u64) -> Vec<(u64, u64)> {
    let chunks = max_chunks.min(total).max(1);
    let base = total / chunks;
    let extra = total % chunks;
    let mut ranges = Vec::with_capacity(chunks as usize);
    let mut start = 0;
    for c in 0..chunks {
        let len = base + u64::from(c < extra);
        ranges.push((start, start + len));
        start += len;
    }
    ranges
}

const EXACT_CHUNKS: u64 = 64;
const SAMPLED_CHUNKS: u64 = 32;

/// Enumerates all `2^N` coalitions once and accumulates the exact transform
/// tensor, reusing each coalition's conditioning solve across every feature.
///
/// Plain integer bitmask order; the reduction grouping is fixed, so the
/// result is bit-identical run to run and independent of worker count.
pub fn exact_transforms(spec: &GaussianSpec, cap: usize) -> Result<TransformTensor> {
    exact_transforms_with(spec, cap, &RidgePolicy::default())
}

/// [`exact_transforms`] under an explicit ridge policy.
pub fn exact_transforms_with(
    spec: &GaussianSpec,
    cap: usize,
    policy: &RidgePolicy,
) -> Result<TransformTensor> {
    let n = spec.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("distribution has no features".into()));
    }
    if n > cap {
        return Err(Error::CapExceeded { n, cap });
    }
    if n > MASK_LIMIT {
        return Err(Error::CapExceeded { n, cap: MASK_LIMIT });
    }

    // weight_excl[s] = W(s, n) for a subset of size s not containing the
    // attributed feature; subsets that contain it enter with W(s - 1, n).
    let weight_excl: Vec<f64> = (0..n).map(|s| shapley_weight(s, n)).collect();

    let total: u64 = 1u64 << n;
    let partials: Vec<Result<Partial>> = chunk_ranges(total, EXACT_CHUNKS)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut part = Partial::zeros(n);
            let mut members = Vec::with_capacity(n);
            let mut complement = Vec::with_capacity(n);
            for mask in lo..hi {
                members.clear();
                complement.clear();
                for i in 0..n {
                    if mask >> i & 1 == 1 {
                        members.push(i);
                    } else {
                        complement.push(i);
                    }
                }
                let gain = subset_gain(
                    spec.covariance(),
                    &members,
                    &complement,
                    policy,
                    &mut part.ridge_events,
                )?;
                let size = members.len();
                // This coalition is the "S u i" term for each of its members
                // and the "-S" term for each excluded feature.
                for &i in &members {
                    accumulate_operators(
                        &members,
                        &complement,
                        &gain,
                        weight_excl[size - 1],
                        &mut part.t_mu[i],
                        &mut part.t_x[i],
                    );
                }
                for &i in &complement {
                    accumulate_operators(
                        &members,
                        &complement,
                        &gain,
                        -weight_excl[size],
                        &mut part.t_mu[i],
                        &mut part.t_x[i],
                    );
                }
            }
            Ok(part)
        })
        .collect();

    let mut total_part = Partial::zeros(n);
    for part in partials {
        total_part.absorb(&part?);
    }
    Ok(TransformTensor::from_parts(
        total_part.t_mu,
        total_part.t_x,
        TensorMode::Exact,
        0,
        None,
        *spec.fingerprint(),
        spec.mean().to_owned(),
        total_part.ridge_events,
    ))
}

/// Monte Carlo estimate of the transform tensor from uniformly random
/// feature permutations.
///
/// Each permutation is walked prefix by prefix; the operator difference of
/// consecutive prefixes is the sampled marginal of the feature that joined,
/// so every walk telescopes and the tensor satisfies the sum identities even
/// at a single permutation. Permutation `p` is drawn from stream `p` of the
/// seeded generator, making the result independent of how the walks are
/// partitioned across workers. With `antithetic`, each drawn permutation is
/// also walked reversed and counts as two.
pub fn sampled_transforms(
    spec: &GaussianSpec,
    permutations: u64,
    seed: u64,
    antithetic: bool,
) -> Result<TransformTensor> {
    sampled_transforms_with(spec, permutations, seed, antithetic, &RidgePolicy::default())
}

/// [`sampled_transforms`] under an explicit ridge policy.
pub fn sampled_transforms_with(
    spec: &GaussianSpec,
    permutations: u64,
    seed: u64,
    antithetic: bool,
    policy: &RidgePolicy,
) -> Result<TransformTensor> {
    let n = spec.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("distribution has no features".into()));
    }
    if permutations == 0 {
        return Err(Error::InvalidArgument("permutation count must be at least 1".into()));
    }
    let draws = if antithetic { permutations.div_ceil(2) } else { permutations };
    let walks_per_draw = if antithetic { 2 } else { 1 };
    let total_walks = draws * walks_per_draw;

    let partials: Vec<Result<Partial>> = chunk_ranges(draws, SAMPLED_CHUNKS)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut part = Partial::zeros(n);
            let mut perm: Vec<usize> = (0..n).collect();
            let mut walker = PrefixWalker::new(n);
            for draw in lo..hi {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(draw);
                perm.clear();
                perm.extend(0..n);
                perm.shuffle(&mut rng);
                walker.walk(spec, &perm, policy, &mut part)?;
                if antithetic {
                    perm.reverse();
                    walker.walk(spec, &perm, policy, &mut part)?;
                }
            }
            Ok(part)
        })
        .collect();

    let mut total_part = Partial::zeros(n);
    for part in partials {
        total_part.absorb(&part?);
    }
    let scale = 1.0 / total_walks as f64;
    for i in 0..n {
        total_part.t_mu[i].mapv_inplace(|v| v * scale);
        total_part.t_x[i].mapv_inplace(|v| v * scale);
    }
    Ok(TransformTensor::from_parts(
        total_part.t_mu,
        total_part.t_x,
        TensorMode::Sampled,
        total_walks,
        Some(seed),
        *spec.fingerprint(),
        spec.mean().to_owned(),
        total_part.ridge_events,
    ))
}

/// Reusable buffers for walking one permutation's prefix chain.
struct PrefixWalker {
    prev_a: Array2<f64>,
    prev_b: Array2<f64>,
    cur_a: Array2<f64>,
    cur_b: Array2<f64>,
    members: Vec<usize>,
    complement: Vec<usize>,
}

impl PrefixWalker {
    fn new(n: usize) -> Self {
        Self {
            prev_a: Array2::zeros((n, n)),
            prev_b: Array2::zeros((n, n)),
            cur_a: Array2::zeros((n, n)),
            cur_b: Array2::zeros((n, n)),
            members: Vec::with_capacity(n),
            complement: Vec::with_capacity(n),
        }
    }

    fn walk(
        &mut self,
        spec: &GaussianSpec,
        perm: &[usize],
        policy: &RidgePolicy,
        part: &mut Partial,
    ) -> Result<()> {
        let n = perm.len();
        // Empty-prefix operators: A = I, B = 0.
        self.prev_a.fill(0.0);
        self.prev_b.fill(0.0);
        for i in 0..n {
            self.prev_a[[i, i]] = 1.0;
        }
        self.members.clear();
        for &joined in perm {
            let pos = self.members.binary_search(&joined).unwrap_err();
            self.members.insert(pos, joined);
            self.complement.clear();
            self.complement.extend((0..n).filter(|i| self.members.binary_search(i).is_err()));
            let gain = subset_gain(
                spec.covariance(),
                &self.members,
                &self.complement,
                policy,
                &mut part.ridge_events,
            )?;
            materialize_operators(
                &self.members,
                &self.complement,
                &gain,
                &mut self.cur_a,
                &mut self.cur_b,
            );
            let t_mu = &mut part.t_mu[joined];
            let t_x = &mut part.t_x[joined];
            ndarray::Zip::from(t_mu)
                .and(&self.cur_a)
                .and(&self.prev_a)
                .for_each(|t, &cur, &prev| *t += cur - prev);
            ndarray::Zip::from(t_x)
                .and(&self.cur_b)
                .and(&self.prev_b)
                .for_each(|t, &cur, &prev| *t += cur - prev);
            std::mem::swap(&mut self.prev_a, &mut self.cur_a);
            std::mem::swap(&mut self.prev_b, &mut self.cur_b);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn identity_spec(n: usize) -> GaussianSpec {
        GaussianSpec::new(Array1::zeros(n), Array2::eye(n)).unwrap()
    }

    fn pair_spec(rho: f64) -> GaussianSpec {
        let cov = array![[1.0, 0.0, 0.0], [0.0, 1.0, rho], [0.0, rho, 1.0]];
        GaussianSpec::new(Array1::zeros(3), cov).unwrap()
    }

    fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn weights_match_hand_values() {
        assert!((shapley_weight(0, 3) - 1.0 / 3.0).abs() < 1e-15);
        assert!((shapley_weight(1, 3) - 1.0 / 6.0).abs() < 1e-15);
        assert!((shapley_weight(2, 3) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn weights_over_remaining_subsets_sum_to_one() {
        let n = 8;
        let mut total = 0.0;
        // All subsets of the 7 features other than a fixed one.
        for mask in 0u32..(1 << (n - 1)) {
            total += shapley_weight(mask.count_ones() as usize, n);
        }
        assert!((total - 1.0).abs() < 1e-12, "sum {total}");
    }

    #[test]
    fn independence_collapses_to_coordinate_selectors() {
        let spec = identity_spec(4);
        let tensor = exact_transforms(&spec, DEFAULT_EXACT_CAP).unwrap();
        for i in 0..4 {
            let mut e_x = Array2::<f64>::zeros((4, 4));
            e_x[[i, i]] = 1.0;
            assert!(max_abs_diff(tensor.t_x(i), &e_x) < 1e-12);
            let e_mu = -e_x;
            assert!(max_abs_diff(tensor.t_mu(i), &e_mu) < 1e-12);
        }
    }

    #[test]
    fn telescoping_identities_hold_for_random_psd_covariance() {
        use rand::Rng;
        use rand::SeedableRng;
        let n = 6;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let a = Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0));
        let cov = a.dot(&a.t()) + Array2::<f64>::eye(n) * 1e-3;
        let spec = GaussianSpec::new(Array1::zeros(n), cov).unwrap();
        let tensor = exact_transforms(&spec, DEFAULT_EXACT_CAP).unwrap();
        let mut sum_x = Array2::<f64>::zeros((n, n));
        let mut sum_mu = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            sum_x += tensor.t_x(i);
            sum_mu += tensor.t_mu(i);
        }
        let eye = Array2::<f64>::eye(n);
        assert!(max_abs_diff(&sum_x, &eye) < 1e-8);
        assert!(max_abs_diff(&sum_mu, &(-eye)) < 1e-8);
    }

    #[test]
    fn sampled_under_independence_equals_exact() {
        let spec = identity_spec(3);
        let exact = exact_transforms(&spec, DEFAULT_EXACT_CAP).unwrap();
        let sampled = sampled_transforms(&spec, 1, 12345, false).unwrap();
        for i in 0..3 {
            assert!(max_abs_diff(exact.t_x(i), sampled.t_x(i)) < 1e-12);
            assert!(max_abs_diff(exact.t_mu(i), sampled.t_mu(i)) < 1e-12);
        }
    }

    #[test]
    fn single_permutation_telescopes() {
        let spec = pair_spec(0.8);
        let tensor = sampled_transforms(&spec, 1, 99, false).unwrap();
        let mut sum_x = Array2::<f64>::zeros((3, 3));
        for i in 0..3 {
            sum_x += tensor.t_x(i);
        }
        assert!(max_abs_diff(&sum_x, &Array2::eye(3)) < 1e-12);
    }

    #[test]
    fn sampled_is_reproducible_and_seed_sensitive() {
        let spec = pair_spec(0.8);
        let a = sampled_transforms(&spec, 16, 5, false).unwrap();
        let b = sampled_transforms(&spec, 16, 5, false).unwrap();
        assert_eq!(a, b);
        let c = sampled_transforms(&spec, 16, 6, false).unwrap();
        assert!(max_abs_diff(a.t_x(1), c.t_x(1)) > 0.0);
    }

    #[test]
    fn antithetic_counts_walks_and_telescopes() {
        let spec = pair_spec(0.5);
        let tensor = sampled_transforms(&spec, 8, 3, true).unwrap();
        assert_eq!(tensor.permutation_count(), 8);
        let mut sum_mu = Array2::<f64>::zeros((3, 3));
        for i in 0..3 {
            sum_mu += tensor.t_mu(i);
        }
        assert!(max_abs_diff(&sum_mu, &(-Array2::eye(3))) < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let spec = identity_spec(5);
        assert!(matches!(
            exact_transforms(&spec, 4),
            Err(Error::CapExceeded { n: 5, cap: 4 })
        ));
    }

    #[test]
    fn exact_recomputation_is_bit_identical() {
        let spec = pair_spec(0.7);
        let a = exact_transforms(&spec, DEFAULT_EXACT_CAP).unwrap();
        let b = exact_transforms(&spec, DEFAULT_EXACT_CAP).unwrap();
        assert_eq!(a, b);
    }
}

//! Feature subsets: the coalitions of the attribution game.

use crate::error::{Error, Result};

/// A subset of the feature indices `{0..universe-1}`.
///
/// Members are kept sorted and deduplicated so that restricted covariance
/// blocks are always assembled in a deterministic order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureSubset {
    members: Vec<usize>,
    universe: usize,
}

impl FeatureSubset {
    /// Builds a subset from arbitrary indices, validating them against the
    /// universe size.
    pub fn new(members: impl IntoIterator<Item = usize>, universe: usize) -> Result<Self> {
        let mut members: Vec<usize> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if let Some(&max) = members.last() {
            if max >= universe {
                return Err(Error::InvalidArgument(format!(
                    "feature index {max} out of range for universe of size {universe}"
                )));
            }
        }
        Ok(Self { members, universe })
    }

    /// The empty coalition.
    pub fn empty(universe: usize) -> Self {
        Self { members: Vec::new(), universe }
    }

    /// The grand coalition `{0..universe-1}`.
    pub fn full(universe: usize) -> Self {
        Self { members: (0..universe).collect(), universe }
    }

    /// Decodes a bitmask: bit `i` set means feature `i` is a member.
    /// Only supported for universes of at most 64 features.
    pub fn from_mask(mask: u64, universe: usize) -> Self {
        debug_assert!(universe <= 64);
        let members = (0..universe).filter(|&i| mask >> i & 1 == 1).collect();
        Self { members, universe }
    }

    pub fn universe_size(&self) -> usize {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.members.len() == self.universe
    }

    /// Sorted member indices.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members.binary_search(&index).is_ok()
    }

    /// The complement within the universe; disjoint from `self` and jointly
    /// covering `{0..universe-1}`.
    pub fn complement(&self) -> Self {
        let members = (0..self.universe).filter(|i| !self.contains(*i)).collect();
        Self { members, universe: self.universe }
    }

    /// Sorted complement indices without allocating a new subset.
    pub fn complement_members(&self) -> Vec<usize> {
        (0..self.universe).filter(|i| !self.contains(*i)).collect()
    }

    /// A new subset with `index` added.
    pub fn with(&self, index: usize) -> Result<Self> {
        if index >= self.universe {
            return Err(Error::InvalidArgument(format!(
                "feature index {index} out of range for universe of size {}",
                self.universe
            )));
        }
        let mut members = self.members.clone();
        if let Err(pos) = members.binary_search(&index) {
            members.insert(pos, index);
        }
        Ok(Self { members, universe: self.universe })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_partitions_universe() {
        let s = FeatureSubset::new([1, 3], 5).unwrap();
        let c = s.complement();
        assert_eq!(c.members(), &[0, 2, 4]);
        let mut all: Vec<usize> = s.members().iter().chain(c.members()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn rejects_out_of_range_member() {
        assert!(FeatureSubset::new([5], 5).is_err());
    }

    #[test]
    fn mask_round_trip() {
        let s = FeatureSubset::from_mask(0b1011, 4);
        assert_eq!(s.members(), &[0, 1, 3]);
        assert!(s.contains(3));
        assert!(!s.contains(2));
    }

    #[test]
    fn dedups_and_sorts() {
        let s = FeatureSubset::new([3, 1, 3, 1], 4).unwrap();
        assert_eq!(s.members(), &[1, 3]);
    }
}

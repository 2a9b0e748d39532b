//! Uniform sampling of set partitions via restricted-growth strings.

use rand::Rng;

use crate::error::{Error, Result};

/// Largest set the sampler accepts; the completion counts stay within `u128`.
pub const MAX_ELEMENTS: usize = 32;

#[derive(Debug, Clone)]
pub struct PartitionSampler {
    n: usize,
    // ways[r][k]: completions with r elements left to place and k blocks open
    ways: Vec<Vec<u128>>,
}

impl PartitionSampler {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_ELEMENTS {
            return Err(Error::Config(format!(
                "partition sampling supports 1..={MAX_ELEMENTS} elements, got {n}"
            )));
        }
        let mut ways = vec![vec![0u128; n + 2]; n];
        for k in 0..n + 2 {
            ways[0][k] = 1;
        }
        for r in 1..n {
            for k in 0..=n - r {
                ways[r][k] = k as u128 * ways[r - 1][k] + ways[r - 1][k + 1];
            }
        }
        Ok(PartitionSampler { n, ways })
    }

    /// The Bell number `B(n)`.
    pub fn count(&self) -> u128 {
        self.ways[self.n - 1][1]
    }

    /// A partition drawn uniformly from all `B(n)`; blocks ordered by first element.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<usize>> {
        let mut blocks = vec![vec![0]];
        for i in 1..self.n {
            let r = self.n - i;
            let k = blocks.len();
            let x = rng.random_range(0..self.ways[r][k]);
            let per_block = self.ways[r - 1][k];
            let join = k as u128 * per_block;
            if x < join {
                blocks[(x / per_block) as usize].push(i);
            } else {
                blocks.push(vec![i]);
            }
        }
        blocks
    }

    /// Uniform over partitions with at least one block of size ≥ 2. For a
    /// single element the only partition is returned.
    pub fn sample_nontrivial<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<usize>> {
        loop {
            let p = self.sample(rng);
            if self.n == 1 || p.len() < self.n {
                return p;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    #[test]
    fn bell_numbers() {
        let bell = [1u128, 2, 5, 15, 52, 203, 877, 4140];
        for (i, &b) in bell.iter().enumerate() {
            assert_eq!(PartitionSampler::new(i + 1).unwrap().count(), b);
        }
        assert!(PartitionSampler::new(MAX_ELEMENTS).is_ok());
        assert!(PartitionSampler::new(0).is_err());
    }

    #[test]
    fn nontrivial_partitions_are_uniform() {
        let s = PartitionSampler::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = BTreeMap::new();
        let trials = 56_000;
        for _ in 0..trials {
            let p = s.sample_nontrivial(&mut rng);
            assert!(p.len() < 4);
            let mut flat: Vec<usize> = p.iter().flatten().copied().collect();
            flat.sort();
            assert_eq!(flat, vec![0, 1, 2, 3]);
            *counts.entry(p).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 14);
        let expected = trials as f64 / 14.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 13 degrees of freedom; 99.9th percentile ≈ 34.5
        assert!(chi2 < 34.5, "chi2 = {chi2}");
    }
}

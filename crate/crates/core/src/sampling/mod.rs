//! Seeded draws of user rows from a frequency table.
//!
//! Rows are never materialized. Tokens are laid out in the table's canonical
//! (byte) order and a draw picks a position in `[0, total_users)` that is
//! mapped back to its token through the cumulative count array.

mod seed;

use rand::Rng;

pub use seed::{
    derive_seed_path, derive_trial_seed, mix64, rng_from_seed, TrialRng, TrialSeed,
};

use crate::error::{Error, Result};
use crate::ingest::FrequencyTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SampleMode {
    WithReplacement,
    WithoutReplacement,
}

impl SampleMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleMode::WithReplacement => "with",
            SampleMode::WithoutReplacement => "without",
        }
    }
}

/// The multiset drawn by one trial, with its provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub table: FrequencyTable,
    pub n: u64,
    pub mode: SampleMode,
    pub seed: TrialSeed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitResult {
    pub sample: Sample,
    pub remainder: FrequencyTable,
}

impl SplitResult {
    /// Exact per-token check that sample + remainder reconstructs `source`.
    pub fn conserves(&self, source: &FrequencyTable) -> bool {
        let mut joined = self.sample.table.clone();
        joined.merge(&self.remainder);
        joined == *source
            && self.remainder.total_users() + self.sample.n == source.total_users()
            && self.sample.table.total_users() == self.sample.n
    }
}

/// Prepared sampler over one source table; reuse it across trials.
#[derive(Debug, Clone)]
pub struct RowSampler<'a> {
    tokens: Vec<&'a [u8]>,
    counts: Vec<u64>,
    cumulative: Vec<u64>,
    total: u64,
}

impl<'a> RowSampler<'a> {
    pub fn new(source: &'a FrequencyTable) -> Self {
        let mut tokens = Vec::with_capacity(source.unique_count());
        let mut counts = Vec::with_capacity(source.unique_count());
        let mut cumulative = Vec::with_capacity(source.unique_count());
        let mut acc = 0u64;
        for (token, count) in source.iter() {
            acc += count;
            tokens.push(token);
            counts.push(count);
            cumulative.push(acc);
        }
        Self {
            tokens,
            counts,
            cumulative,
            total: acc,
        }
    }

    pub fn total_users(&self) -> u64 {
        self.total
    }

    fn build_table(&self, drawn: &[u64]) -> FrequencyTable {
        let mut table = FrequencyTable::new();
        for (i, &c) in drawn.iter().enumerate() {
            table.add_slice(self.tokens[i], c);
        }
        table
    }

    /// Per-position counts of `n` independent row draws.
    pub fn draw_with_replacement_counts<R: Rng>(&self, n: u64, rng: &mut R) -> Result<Vec<u64>> {
        if n > 0 && self.total == 0 {
            return Err(Error::EmptyDistribution);
        }
        let mut drawn = vec![0u64; self.tokens.len()];
        for _ in 0..n {
            let row = rng.random_range(0..self.total);
            let idx = self.cumulative.partition_point(|&c| c <= row);
            drawn[idx] += 1;
        }
        Ok(drawn)
    }

    pub fn with_replacement(&self, n: u64, seed: TrialSeed) -> Result<Sample> {
        let drawn = self.draw_with_replacement_counts(n, &mut seed.rng())?;
        let table = self.build_table(&drawn);
        table.debug_check();
        Ok(Sample {
            table,
            n,
            mode: SampleMode::WithReplacement,
            seed,
        })
    }

    /// Uniform draw of `n` distinct rows: each step picks one of the rows still
    /// in the pool, located through a Fenwick tree over remaining counts.
    pub fn without_replacement(&self, n: u64, seed: TrialSeed) -> Result<SplitResult> {
        if n > self.total {
            return Err(Error::SampleTooLarge {
                requested: n,
                available: self.total,
            });
        }
        let mut rng = seed.rng();
        let mut pool = Fenwick::from_counts(&self.counts);
        let mut drawn = vec![0u64; self.tokens.len()];
        let mut remaining = self.total;
        for _ in 0..n {
            let row = rng.random_range(0..remaining);
            let idx = pool.find(row);
            pool.decrement(idx);
            drawn[idx] += 1;
            remaining -= 1;
        }
        let rest: Vec<u64> = self
            .counts
            .iter()
            .zip(&drawn)
            .map(|(&c, &d)| c - d)
            .collect();
        let sample = Sample {
            table: self.build_table(&drawn),
            n,
            mode: SampleMode::WithoutReplacement,
            seed,
        };
        let remainder = self.build_table(&rest);
        sample.table.debug_check();
        remainder.debug_check();
        Ok(SplitResult { sample, remainder })
    }
}

/// `n` independent row draws from `source`.
pub fn sample_with_replacement(source: &FrequencyTable, n: u64, seed: TrialSeed) -> Result<Sample> {
    RowSampler::new(source).with_replacement(n, seed)
}

/// `n` distinct rows from `source`, plus the rows left behind.
pub fn sample_without_replacement(
    source: &FrequencyTable,
    n: u64,
    seed: TrialSeed,
) -> Result<SplitResult> {
    RowSampler::new(source).without_replacement(n, seed)
}

/// Fenwick tree over non-negative counts supporting prefix search.
#[derive(Debug, Clone)]
struct Fenwick {
    tree: Vec<u64>,
    top_bit: usize,
}

impl Fenwick {
    fn from_counts(counts: &[u64]) -> Self {
        let n = counts.len();
        let mut tree = vec![0u64; n + 1];
        tree[1..].copy_from_slice(counts);
        for i in 1..=n {
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                tree[parent] += tree[i];
            }
        }
        let top_bit = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        Self { tree, top_bit }
    }

    fn decrement(&mut self, idx: usize) {
        let mut i = idx + 1;
        while i < self.tree.len() {
            self.tree[i] -= 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Smallest 0-based index whose inclusive prefix sum exceeds `target`.
    fn find(&self, mut target: u64) -> usize {
        let mut pos = 0usize;
        let mut step = self.top_bit;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(pairs: &[(&str, u64)]) -> FrequencyTable {
        FrequencyTable::from_counts(pairs.iter().map(|&(t, c)| (t, c))).unwrap()
    }

    #[test]
    fn fenwick_search_matches_linear_scan() {
        let counts = [3u64, 0, 5, 1, 0, 2, 7];
        let fw = Fenwick::from_counts(&counts);
        let total: u64 = counts.iter().sum();
        for target in 0..total {
            let mut acc = 0;
            let want = counts
                .iter()
                .position(|&c| {
                    acc += c;
                    acc > target
                })
                .unwrap();
            assert_eq!(fw.find(target), want, "target {target}");
        }
    }

    #[test]
    fn zero_draws_give_empty_sample() {
        let src = table(&[("a", 3)]);
        let s = sample_with_replacement(&src, 0, TrialSeed::new(1, 0)).unwrap();
        assert!(s.table.is_empty());
        let empty = FrequencyTable::new();
        assert!(sample_with_replacement(&empty, 0, TrialSeed::new(1, 0)).is_ok());
        assert!(matches!(
            sample_with_replacement(&empty, 1, TrialSeed::new(1, 0)),
            Err(Error::EmptyDistribution)
        ));
    }

    #[test]
    fn single_outcome_source() {
        let s = sample_with_replacement(&table(&[("a", 1)]), 5, TrialSeed::new(9, 2)).unwrap();
        assert_eq!(s.table, table(&[("a", 5)]));
        assert_eq!(s.n, 5);
    }

    #[test]
    fn full_and_empty_splits() {
        let src = table(&[("a", 5), ("b", 3), ("c", 1)]);
        let all = sample_without_replacement(&src, 9, TrialSeed::new(3, 0)).unwrap();
        assert_eq!(all.sample.table, src);
        assert!(all.remainder.is_empty());
        let none = sample_without_replacement(&src, 0, TrialSeed::new(3, 0)).unwrap();
        assert!(none.sample.table.is_empty());
        assert_eq!(none.remainder, src);
        assert!(matches!(
            sample_without_replacement(&src, 10, TrialSeed::new(3, 0)),
            Err(Error::SampleTooLarge { .. })
        ));
    }

    #[test]
    fn draws_are_deterministic_per_seed() {
        let src = table(&[("a", 50), ("b", 30), ("c", 20)]);
        let a = sample_with_replacement(&src, 40, TrialSeed::new(11, 4)).unwrap();
        let b = sample_with_replacement(&src, 40, TrialSeed::new(11, 4)).unwrap();
        let c = sample_with_replacement(&src, 40, TrialSeed::new(11, 5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.table, c.table);
    }

    #[test]
    fn without_replacement_respects_source_counts() {
        let src = table(&[("a", 4), ("b", 1), ("c", 2)]);
        for trial in 0..200 {
            let split = sample_without_replacement(&src, 5, TrialSeed::new(5, trial)).unwrap();
            assert!(split.conserves(&src));
            for (tok, c) in split.sample.table.iter() {
                assert!(c <= src.count(tok));
            }
        }
    }
}

//! Rank-ordered empirical distributions.

use std::collections::HashMap;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::ingest::{FrequencyTable, Token};
use crate::sampling::rng_from_seed;

/// How equal counts are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Ascending token bytes.
    #[default]
    ByteOrder,
    /// Seeded shuffle within each run of equal counts.
    Shuffled(u64),
}

/// Tokens ordered by descending count. Rank 1 is the most frequent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedDistribution {
    ordered: Vec<(Token, u64)>,
    total_users: u64,
}

pub fn rank(table: &FrequencyTable) -> Result<RankedDistribution> {
    rank_with(table, TieBreak::ByteOrder)
}

pub fn rank_with(table: &FrequencyTable, ties: TieBreak) -> Result<RankedDistribution> {
    if table.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let mut ordered: Vec<(Token, u64)> = table.iter().map(|(t, c)| (t.to_vec(), c)).collect();
    // byte order comes from the table; the stable sort keeps it inside ties
    ordered.sort_by(|a, b| b.1.cmp(&a.1));
    if let TieBreak::Shuffled(seed) = ties {
        let mut rng = rng_from_seed(seed);
        let mut start = 0;
        while start < ordered.len() {
            let count = ordered[start].1;
            let end = start + ordered[start..].partition_point(|e| e.1 == count);
            ordered[start..end].shuffle(&mut rng);
            start = end;
        }
    }
    Ok(RankedDistribution {
        ordered,
        total_users: table.total_users(),
    })
}

impl RankedDistribution {
    /// Number of distinct tokens.
    pub fn len(&self) -> usize {
        self.ordered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordered.is_empty()
    }

    pub fn total_users(&self) -> u64 {
        self.total_users
    }

    pub fn entries(&self) -> &[(Token, u64)] {
        &self.ordered
    }

    pub fn tokens(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        self.ordered.iter().map(|(t, _)| t.as_slice())
    }

    pub fn counts(&self) -> impl ExactSizeIterator<Item = u64> + '_ {
        self.ordered.iter().map(|&(_, c)| c)
    }

    fn check_rank(&self, rank: usize) -> Result<usize> {
        if rank == 0 || rank > self.ordered.len() {
            return Err(Error::RankOutOfRange {
                rank,
                unique: self.ordered.len(),
            });
        }
        Ok(rank - 1)
    }

    /// The token at 1-indexed `rank`.
    pub fn token(&self, rank: usize) -> Result<&[u8]> {
        let i = self.check_rank(rank)?;
        Ok(&self.ordered[i].0)
    }

    pub fn count_at(&self, rank: usize) -> Result<u64> {
        let i = self.check_rank(rank)?;
        Ok(self.ordered[i].1)
    }

    pub fn probability(&self, rank: usize) -> Result<f64> {
        Ok(self.count_at(rank)? as f64 / self.total_users as f64)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total_users as f64;
        self.counts().map(|c| c as f64 / total).collect()
    }

    pub fn cumulative_counts(&self) -> Vec<u64> {
        self.counts()
            .scan(0u64, |acc, c| {
                *acc += c;
                Some(*acc)
            })
            .collect()
    }

    /// Token to count lookup.
    pub fn lookup(&self) -> HashMap<&[u8], u64> {
        self.ordered
            .iter()
            .map(|(t, c)| (t.as_slice(), *c))
            .collect()
    }

    pub fn to_table(&self) -> FrequencyTable {
        let mut t = FrequencyTable::new();
        for (tok, c) in &self.ordered {
            t.add(tok.clone(), *c);
        }
        t
    }
}

pub fn probability(dist: &RankedDistribution, rank: usize) -> Result<f64> {
    dist.probability(rank)
}

/// Head/tail shape of a distribution.
///
/// Both directions of the users/unique ratio are kept: published tables are
/// not consistent about which one they label "#users/#unique".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailStats {
    pub unique_count: u64,
    pub freq1_count: u64,
    pub freq_gt1_count: u64,
    pub total_users: u64,
    /// unique_count / total_users
    pub unique_per_user: f64,
    /// total_users / unique_count
    pub users_per_unique: f64,
}

pub fn tail_stats(dist: &RankedDistribution) -> TailStats {
    tail_stats_from_counts(dist.counts())
}

pub fn tail_stats_from_counts<I: IntoIterator<Item = u64>>(counts: I) -> TailStats {
    let mut unique = 0u64;
    let mut freq1 = 0u64;
    let mut total = 0u64;
    for c in counts {
        unique += 1;
        total += c;
        if c == 1 {
            freq1 += 1;
        }
    }
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    TailStats {
        unique_count: unique,
        freq1_count: freq1,
        freq_gt1_count: unique - freq1,
        total_users: total,
        unique_per_user: ratio(unique, total),
        users_per_unique: ratio(total, unique),
    }
}

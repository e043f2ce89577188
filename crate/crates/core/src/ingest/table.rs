use std::collections::btree_map;
use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// A password token. Raw bytes, never normalized.
pub type Token = Vec<u8>;

/// Multiset of password tokens.
///
/// Iteration is always in ascending byte order of the token, which makes every
/// consumer that walks the table deterministic without an extra sort.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: BTreeMap<Token, u64>,
    total_users: u64,
}

impl FrequencyTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build a table from `(token, count)` pairs. Repeated tokens are summed.
    pub fn from_counts<I, T>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (T, u64)>,
        T: Into<Token>,
    {
        let mut table = Self::new();
        for (token, count) in pairs {
            if count == 0 {
                return Err(Error::invalid("token counts must be positive"));
            }
            table.add(token.into(), count);
        }
        Ok(table)
    }

    /// Add `count` users holding `token`. A zero count is a no-op.
    pub fn add(&mut self, token: impl Into<Token>, count: u64) {
        if count == 0 {
            return;
        }
        *self.counts.entry(token.into()).or_insert(0) += count;
        self.total_users += count;
    }

    pub(crate) fn add_slice(&mut self, token: &[u8], count: u64) {
        if count == 0 {
            return;
        }
        match self.counts.get_mut(token) {
            Some(c) => *c += count,
            None => {
                self.counts.insert(token.to_vec(), count);
            }
        }
        self.total_users += count;
    }

    /// Number of users holding `token` (0 if absent).
    pub fn count(&self, token: &[u8]) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn contains(&self, token: &[u8]) -> bool {
        self.counts.contains_key(token)
    }

    pub fn total_users(&self) -> u64 {
        self.total_users
    }

    pub fn unique_count(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Entries in ascending token byte order.
    pub fn iter(&self) -> Iter<'_> {
        Iter {
            inner: self.counts.iter(),
        }
    }

    /// Fold another table into this one.
    pub fn merge(&mut self, other: &FrequencyTable) {
        for (token, count) in other.iter() {
            self.add_slice(token, count);
        }
    }

    /// Per-token difference `self - other`. Fails if `other` holds more of any
    /// token than `self` does.
    pub fn subtract(&self, other: &FrequencyTable) -> Result<FrequencyTable> {
        let mut out = self.clone();
        for (token, count) in other.iter() {
            let have = out.counts.get_mut(token).ok_or_else(|| {
                Error::invalid("subtracted table holds a token absent from the source")
            })?;
            if *have < count {
                return Err(Error::invalid(
                    "subtracted table holds more users of a token than the source",
                ));
            }
            *have -= count;
            if *have == 0 {
                out.counts.remove(token);
            }
            out.total_users -= count;
        }
        Ok(out)
    }

    /// Sum of per-token counts, recomputed from scratch.
    pub fn recount(&self) -> u64 {
        self.counts.values().sum()
    }

    pub(crate) fn debug_check(&self) {
        debug_assert_eq!(self.recount(), self.total_users);
        debug_assert!(self.counts.values().all(|&c| c > 0));
    }
}

pub struct Iter<'a> {
    inner: btree_map::Iter<'a, Token, u64>,
}

impl<'a> Iterator for Iter<'a> {
    type Item = (&'a [u8], u64);

    fn next(&mut self) -> Option<Self::Item> {
        self.inner.next().map(|(t, &c)| (t.as_slice(), c))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.inner.size_hint()
    }
}

impl ExactSizeIterator for Iter<'_> {}

impl<'a> IntoIterator for &'a FrequencyTable {
    type Item = (&'a [u8], u64);
    type IntoIter = Iter<'a>;

    fn into_iter(self) -> Iter<'a> {
        self.iter()
    }
}

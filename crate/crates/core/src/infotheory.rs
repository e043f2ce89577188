//! Entropy, KL divergence and the Sanov large-deviation bound, all in bits.

use std::f64::consts::LN_2;

use rayon::prelude::*;

use crate::dist::RankedDistribution;
use crate::error::{Error, Result};
use crate::sampling::{RowSampler, TrialSeed};

/// Shannon entropy in bits.
pub fn entropy(p: &RankedDistribution) -> f64 {
    entropy_of_counts(p.counts(), p.total_users())
}

fn entropy_of_counts(counts: impl Iterator<Item = u64>, total: u64) -> f64 {
    let total = total as f64;
    let h: f64 = counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

/// `D(q || p)` in bits. `+inf` when `q` puts mass on a token `p` never saw.
pub fn kl_divergence(q: &RankedDistribution, p: &RankedDistribution) -> f64 {
    let p_counts = p.lookup();
    let q_total = q.total_users() as f64;
    let p_total = p.total_users() as f64;
    let mut d = 0.0;
    for (token, qc) in q.entries() {
        let Some(&pc) = p_counts.get(token.as_slice()) else {
            return f64::INFINITY;
        };
        let qw = *qc as f64 / q_total;
        let pw = pc as f64 / p_total;
        d += qw * (qw / pw).log2();
    }
    // rounding can leave a tiny negative residue for near-identical inputs
    d.max(0.0)
}

/// KL divergence of the empirical distribution `drawn / n` from `probs`,
/// where both are aligned by position.
fn kl_of_draw(drawn: &[u64], n: u64, probs: &[f64]) -> f64 {
    let n = n as f64;
    let d: f64 = drawn
        .iter()
        .zip(probs)
        .filter(|(&c, _)| c > 0)
        .map(|(&c, &p)| {
            let q = c as f64 / n;
            q * (q / p).log2()
        })
        .sum();
    d.max(0.0)
}

/// The Sanov bound `P[D(q^n || p0) > alpha] <= (n+1)^|A| 2^{-n alpha}`, held in log2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SanovReport {
    pub n: u64,
    /// Alphabet size in the polynomial factor.
    pub support_size: u64,
    /// KL threshold in bits.
    pub alpha: f64,
    pub log2_bound: f64,
    /// Sample size where the log-bound stops growing: `|A| / (alpha ln 2) - 1`.
    pub turning_point_n: f64,
}

impl SanovReport {
    /// The bound is vacuous when it is not below 1.
    pub fn is_vacuous(&self) -> bool {
        self.log2_bound >= 0.0
    }

    /// `min(1, 2^log2_bound)`.
    pub fn bound(&self) -> f64 {
        if self.is_vacuous() {
            1.0
        } else {
            self.log2_bound.exp2()
        }
    }

    pub const CSV_HEADER: &'static str = "n,support_size,alpha,log2_bound,turning_point_n";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.n, self.support_size, self.alpha, self.log2_bound, self.turning_point_n
        )
    }
}

pub fn sanov_report(n: u64, support_size: u64, alpha: f64) -> Result<SanovReport> {
    if n == 0 || support_size == 0 {
        return Err(Error::invalid("n and support_size must be at least 1"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("alpha must be a positive finite number"));
    }
    let n_f = n as f64;
    let s_f = support_size as f64;
    // log2(n + 1) without forming n + 1
    let log2_n1 = n_f.ln_1p() / LN_2;
    Ok(SanovReport {
        n,
        support_size,
        alpha,
        log2_bound: s_f * log2_n1 - n_f * alpha,
        turning_point_n: s_f / (alpha * LN_2) - 1.0,
    })
}

/// Fraction of `trials` with-replacement samples of size `n` whose empirical
/// distribution is more than `alpha` bits from `p0`. Trial `t` draws with seed
/// `(base_seed, t)`, so the result does not depend on thread count.
pub fn atypicality_rate(
    p0: &RankedDistribution,
    n: u64,
    alpha: f64,
    trials: u64,
    base_seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let table = p0.to_table();
    let sampler = RowSampler::new(&table);
    let total = table.total_users() as f64;
    let probs: Vec<f64> = table.iter().map(|(_, c)| c as f64 / total).collect();
    let atypical = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = TrialSeed::new(base_seed, t).rng();
            let drawn = sampler.draw_with_replacement_counts(n, &mut rng)?;
            Ok(u64::from(kl_of_draw(&drawn, n, &probs) > alpha))
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum::<u64>();
    Ok(atypical as f64 / trials as f64)
}

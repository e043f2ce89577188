//! Synthetic heavy-tailed datasets.
//!
//! Rank `r` of a Zipf–Mandelbrot law gets weight `1 / (r + shift)^exponent`.
//! Draws use inverse-CDF over the precomputed cumulative weights.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{AnonProfile, FrequencyTable};
use crate::sampling::{derive_trial_seed, rng_from_seed};

/// Draws per parallel block. Fixed so output never depends on thread count.
const BLOCK: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct ZipfMandelbrotSpec {
    pub vocab_size: u64,
    pub exponent: f64,
    pub shift: f64,
    pub users: u64,
    pub seed: u64,
    /// Token text is `<prefix><rank + rank_offset>`.
    pub prefix: String,
    pub rank_offset: u64,
}

impl ZipfMandelbrotSpec {
    pub fn new(vocab_size: u64, exponent: f64, shift: f64, users: u64, seed: u64) -> Self {
        Self {
            vocab_size,
            exponent,
            shift,
            users,
            seed,
            prefix: "w".to_string(),
            rank_offset: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 {
            return Err(Error::invalid("vocab must be at least 1"));
        }
        if self.vocab_size > u32::MAX as u64 {
            return Err(Error::invalid("vocab must fit in 32 bits"));
        }
        if self.users == 0 {
            return Err(Error::invalid("users must be at least 1"));
        }
        if !(self.exponent >= 0.0 && self.exponent.is_finite()) {
            return Err(Error::invalid("exponent must be a finite non-negative number"));
        }
        if !(self.shift >= 0.0 && self.shift.is_finite()) {
            return Err(Error::invalid("shift must be a finite non-negative number"));
        }
        Ok(())
    }

    /// Normalized probability of each rank, rank 1 first.
    pub fn probabilities(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let weights = self.weights();
        let total: f64 = weights.iter().sum();
        Ok(weights.into_iter().map(|w| w / total).collect())
    }

    fn weights(&self) -> Vec<f64> {
        (1..=self.vocab_size)
            .map(|r| (r as f64 + self.shift).powf(-self.exponent))
            .collect()
    }

    pub fn token(&self, rank: u64) -> String {
        format!("{}{}", self.prefix, rank + self.rank_offset)
    }
}

/// `users` i.i.d. draws from the law, counted per token.
pub fn generate(spec: &ZipfMandelbrotSpec) -> Result<FrequencyTable> {
    let counts = generate_rank_counts(spec)?;
    let mut table = FrequencyTable::new();
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 {
            table.add(spec.token(i as u64 + 1), c);
        }
    }
    table.debug_check();
    Ok(table)
}

/// Per-rank counts (index 0 is rank 1).
pub fn generate_rank_counts(spec: &ZipfMandelbrotSpec) -> Result<Vec<u64>> {
    spec.validate()?;
    let mut cumulative = spec.weights();
    let mut acc = 0.0;
    for w in cumulative.iter_mut() {
        acc += *w;
        *w = acc;
    }
    let total = acc;
    let last = cumulative.len() - 1;
    let blocks = spec.users.div_ceil(BLOCK);
    let drawn: Vec<Vec<u32>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let len = BLOCK.min(spec.users - b * BLOCK);
            let mut rng = rng_from_seed(derive_trial_seed(spec.seed, b));
            (0..len)
                .map(|_| {
                    let u = rng.random::<f64>() * total;
                    cumulative.partition_point(|&c| c <= u).min(last) as u32
                })
                .collect()
        })
        .collect();
    let mut counts = vec![0u64; cumulative.len()];
    for block in drawn {
        for i in block {
            counts[i as usize] += 1;
        }
    }
    Ok(counts)
}

/// A table with synthetic tokens `p1, p2, ...` carrying exactly `counts`.
pub fn from_profile(descending_counts: &[u64]) -> Result<FrequencyTable> {
    if descending_counts.contains(&0) {
        return Err(Error::invalid("profile counts must be positive"));
    }
    if descending_counts.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::invalid("profile counts must be non-increasing"));
    }
    let mut table = FrequencyTable::new();
    for (i, &c) in descending_counts.iter().enumerate() {
        table.add(format!("p{}", i + 1), c);
    }
    Ok(table)
}

pub fn from_anon_profile(profile: &AnonProfile) -> Result<FrequencyTable> {
    from_profile(profile.counts())
}

/// Profile with `heavy_tokens` tokens of count >= 2 holding `heavy_users`
/// users between them (Zipf-shaped with `exponent`), followed by `singletons`
/// tokens of count 1.
pub fn tail_profile(
    heavy_tokens: u64,
    heavy_users: u64,
    singletons: u64,
    exponent: f64,
) -> Result<Vec<u64>> {
    if heavy_users < 2 * heavy_tokens {
        return Err(Error::invalid("heavy tokens need at least two users each"));
    }
    if heavy_tokens == 0 && heavy_users > 0 {
        return Err(Error::invalid("heavy users without heavy tokens"));
    }
    let mut counts = vec![2u64; heavy_tokens as usize];
    let extra = heavy_users - 2 * heavy_tokens;
    if extra > 0 {
        let w: Vec<f64> = (1..=heavy_tokens)
            .map(|r| (r as f64).powf(-exponent))
            .collect();
        let wsum: f64 = w.iter().sum();
        let mut given = 0u64;
        let mut rema: Vec<(f64, usize)> = Vec::with_capacity(w.len());
        for (i, wi) in w.iter().enumerate() {
            let share = extra as f64 * wi / wsum;
            let whole = share.floor() as u64;
            counts[i] += whole;
            given += whole;
            rema.push((share - whole as f64, i));
        }
        // largest remainder; ties go to the better rank
        rema.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, i) in rema.iter().take((extra - given) as usize) {
            counts[i] += 1;
        }
        counts.sort_unstable_by(|a, b| b.cmp(a));
    }
    counts.extend(std::iter::repeat_n(1, singletons as usize));
    Ok(counts)
}

/// Named generator parameters shipped in `presets/`.
pub const PRESETS: &[(&str, &str)] = &[
    ("rockyou-like", include_str!("../presets/rockyou-like.synth")),
    ("compubits-like", include_str!("../presets/compubits-like.synth")),
    ("hotmail-like", include_str!("../presets/hotmail-like.synth")),
    ("flirtlife-like", include_str!("../presets/flirtlife-like.synth")),
    ("heavy-tail-1m", include_str!("../presets/heavy-tail-1m.synth")),
    ("overlap-a", include_str!("../presets/overlap-a.synth")),
    ("overlap-b", include_str!("../presets/overlap-b.synth")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

/// Look up a preset and attach a seed.
pub fn preset(name: &str, seed: u64) -> Result<ZipfMandelbrotSpec> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::invalid(format!("unknown preset {name:?}")))?;
    parse_spec_text(text, name, seed)
}

/// Parse `key = value` lines (`vocab`, `exponent`, `shift`, `users`, optional
/// `prefix`, `rank_offset`). `#` starts a comment.
pub fn parse_spec_text(text: &str, name: &str, seed: u64) -> Result<ZipfMandelbrotSpec> {
    let mut spec = ZipfMandelbrotSpec::new(0, 0.0, 0.0, 0, seed);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(name, i + 1, "expected key = value"))?;
        apply_spec_key(&mut spec, k.trim(), v.trim())
            .map_err(|m| Error::format(name, i + 1, m))?;
    }
    spec.validate()
        .map_err(|e| Error::format(name, 0, e.to_string()))?;
    Ok(spec)
}

/// Set one field of a spec from text. Returns a message on failure.
pub fn apply_spec_key(
    spec: &mut ZipfMandelbrotSpec,
    key: &str,
    value: &str,
) -> std::result::Result<(), String> {
    fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
        v.parse().map_err(|_| format!("bad value for {key}: {v:?}"))
    }
    match key {
        "vocab" => spec.vocab_size = num(key, value)?,
        "exponent" => spec.exponent = num(key, value)?,
        "shift" => spec.shift = num(key, value)?,
        "users" => spec.users = num(key, value)?,
        "seed" => spec.seed = num(key, value)?,
        "prefix" => spec.prefix = value.to_string(),
        "rank_offset" => spec.rank_offset = num(key, value)?,
        other => return Err(format!("unknown synth key {other:?}")),
    }
    Ok(())
}

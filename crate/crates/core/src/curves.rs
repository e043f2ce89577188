//! Guess curves: optimal self-guessing (F), cross-attack (G) and the guessing gap (H).

use std::collections::HashSet;
use std::fmt;
use std::io::{self, Write};

use rand::seq::SliceRandom;

use crate::dist::RankedDistribution;
use crate::error::{Error, Result};
use crate::ingest::{FrequencyTable, Token};
use crate::sampling::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Unit {
    #[default]
    Users,
    Probability,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Users => "users",
            Unit::Probability => "probability",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "users" => Ok(Unit::Users),
            "probability" | "prob" => Ok(Unit::Probability),
            other => Err(Error::invalid(format!("unknown unit {other:?}"))),
        }
    }

    fn scale(self, users: u64, total: u64) -> f64 {
        match self {
            Unit::Users => users as f64,
            Unit::Probability => {
                if total == 0 {
                    0.0
                } else {
                    users as f64 / total as f64
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveKind {
    /// Cumulative successes of a distribution guessing itself in optimal order.
    F,
    /// Cumulative successes of a foreign order against a target.
    G,
    /// Cumulative shortfall of an order relative to the optimal one.
    H,
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveKind::F => "F",
            CurveKind::G => "G",
            CurveKind::H => "H",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OrderMode {
    Best,
    Worst,
    Random,
}

impl OrderMode {
    pub fn as_str(self) -> &'static str {
        match self {
            OrderMode::Best => "best",
            OrderMode::Worst => "worst",
            OrderMode::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "best" => Ok(OrderMode::Best),
            "worst" => Ok(OrderMode::Worst),
            "random" => Ok(OrderMode::Random),
            other => Err(Error::invalid(format!("unknown ordering {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderOrigin {
    pub source: String,
    pub mode: OrderMode,
    pub seed: Option<u64>,
}

/// A guessing order: distinct tokens, guessed front to back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuessOrder {
    tokens: Vec<Token>,
    origin: OrderOrigin,
}

impl GuessOrder {
    pub fn new(tokens: Vec<Token>, origin: OrderOrigin) -> Result<Self> {
        let mut seen = HashSet::with_capacity(tokens.len());
        if !tokens.iter().all(|t| seen.insert(t.as_slice())) {
            return Err(Error::invalid("guess order contains a duplicate token"));
        }
        Ok(Self { tokens, origin })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn origin(&self) -> &OrderOrigin {
        &self.origin
    }
}

/// Derive an order from a ranking. `Worst` is the exact reverse of `Best`;
/// `Random` needs a seed.
pub fn reorder(
    ranking: &RankedDistribution,
    mode: OrderMode,
    seed: Option<u64>,
    source: &str,
) -> Result<GuessOrder> {
    let mut tokens: Vec<Token> = ranking.tokens().map(<[u8]>::to_vec).collect();
    match mode {
        OrderMode::Best => {}
        OrderMode::Worst => tokens.reverse(),
        OrderMode::Random => {
            let seed = seed.ok_or_else(|| Error::invalid("random ordering requires a seed"))?;
            tokens.shuffle(&mut rng_from_seed(seed));
        }
    }
    Ok(GuessOrder {
        tokens,
        origin: OrderOrigin {
            source: source.to_string(),
            mode,
            seed: if mode == OrderMode::Random { seed } else { None },
        },
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CurveMeta {
    pub source: String,
    pub target: String,
    pub trial: u64,
}

/// Curve values indexed by guess number `g = 1..=g_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct GuessCurve {
    values: Vec<f64>,
    unit: Unit,
    kind: CurveKind,
    pub meta: CurveMeta,
}

impl GuessCurve {
    fn from_users(users: Vec<u64>, total: u64, unit: Unit, kind: CurveKind) -> Self {
        Self {
            values: users.into_iter().map(|u| unit.scale(u, total)).collect(),
            unit,
            kind,
            meta: CurveMeta::default(),
        }
    }

    /// A curve of `len` zeros, e.g. the gap against an empty target.
    pub fn zeros(len: usize, kind: CurveKind, unit: Unit) -> Self {
        Self {
            values: vec![0.0; len],
            unit,
            kind,
            meta: CurveMeta::default(),
        }
    }

    pub fn with_meta(mut self, source: &str, target: &str, trial: u64) -> Self {
        self.meta = CurveMeta {
            source: source.to_string(),
            target: target.to_string(),
            trial,
        };
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn g_max(&self) -> usize {
        self.values.len()
    }

    /// Value after `g` guesses (1-indexed). `g = 0` is 0 by definition.
    pub fn at(&self, g: usize) -> Option<f64> {
        match g {
            0 => Some(0.0),
            _ => self.values.get(g - 1).copied(),
        }
    }

    /// Value at `g`, clamped to the last guess when `g > g_max`.
    pub fn at_clamped(&self, g: usize) -> f64 {
        match g.min(self.values.len()) {
            0 => 0.0,
            g => self.values[g - 1],
        }
    }

    pub fn last(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }
}

fn cumulative(counts: impl Iterator<Item = u64>) -> Vec<u64> {
    counts
        .scan(0u64, |acc, c| {
            *acc += c;
            Some(*acc)
        })
        .collect()
}

/// Cumulative count of the top-`g` ranks of `dist`.
pub fn optimal_curve(dist: &RankedDistribution, unit: Unit) -> GuessCurve {
    GuessCurve::from_users(
        cumulative(dist.counts()),
        dist.total_users(),
        unit,
        CurveKind::F,
    )
}

/// Cumulative target counts of the first `g` tokens of `order`. Tokens absent
/// from the target contribute nothing.
pub fn attack_curve(order: &GuessOrder, target: &FrequencyTable, unit: Unit) -> GuessCurve {
    GuessCurve::from_users(
        cumulative(order.tokens().iter().map(|t| target.count(t))),
        target.total_users(),
        unit,
        CurveKind::G,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapExtension {
    /// Stop when the attack order runs out.
    #[default]
    Truncate,
    /// Continue with the unguessed tokens of `p0` in optimal order.
    ExtendOptimal,
}

impl GapExtension {
    pub fn as_str(self) -> &'static str {
        match self {
            GapExtension::Truncate => "truncate",
            GapExtension::ExtendOptimal => "extend_optimal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "truncate" => Ok(GapExtension::Truncate),
            "extend_optimal" | "extend-optimal" | "extend" => Ok(GapExtension::ExtendOptimal),
            other => Err(Error::invalid(format!("unknown gap mode {other:?}"))),
        }
    }
}

/// Shortfall of `order` against the optimal order of `p0`, both scored on `p0`:
/// `H(g) = sum_{k<=g} p0(rank k) - p0(order[k])`.
///
/// With [`GapExtension::ExtendOptimal`] the order is padded with the tokens of
/// `p0` it never guessed, so `H` returns to zero once all of `p0` is covered.
pub fn gap_curve(
    p0: &RankedDistribution,
    order: &GuessOrder,
    extend: GapExtension,
    unit: Unit,
) -> GuessCurve {
    let lookup = p0.lookup();
    let mut guessed: Vec<u64> = order
        .tokens()
        .iter()
        .map(|t| lookup.get(t.as_slice()).copied().unwrap_or(0))
        .collect();
    if extend == GapExtension::ExtendOptimal {
        let in_order: HashSet<&[u8]> = order.tokens().iter().map(Vec::as_slice).collect();
        guessed.extend(
            p0.entries()
                .iter()
                .filter(|(t, _)| !in_order.contains(t.as_slice()))
                .map(|&(_, c)| c),
        );
    }
    let optimal = p0.counts().chain(std::iter::repeat(0));
    let mut best = 0u64;
    let mut got = 0u64;
    let gaps: Vec<u64> = guessed
        .iter()
        .zip(optimal)
        .map(|(&g, o)| {
            best += o;
            got += g;
            debug_assert!(best >= got, "optimal order must dominate");
            best - got
        })
        .collect();
    GuessCurve::from_users(gaps, p0.total_users(), unit, CurveKind::H)
}

/// Largest value of a curve and the first/last guess numbers where it occurs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub value: f64,
    pub first_g: usize,
    pub last_g: usize,
}

pub fn peak(curve: &GuessCurve) -> Option<Peak> {
    let max = curve.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first = curve.values().iter().position(|&v| v == max)?;
    let last = curve.values().iter().rposition(|&v| v == max)?;
    Some(Peak {
        value: max,
        first_g: first + 1,
        last_g: last + 1,
    })
}

/// A maximal run of equal values spanning guesses `start_g..=end_g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plateau {
    pub start_g: usize,
    pub end_g: usize,
    pub value: f64,
}

impl Plateau {
    pub fn len(&self) -> usize {
        self.end_g - self.start_g + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Maximal constant runs covering at least `min_len` guesses.
pub fn plateaus(curve: &GuessCurve, min_len: usize) -> Vec<Plateau> {
    let v = curve.values();
    let mut out = Vec::new();
    let mut start = 0;
    while start < v.len() {
        let mut end = start;
        while end + 1 < v.len() && v[end + 1] == v[start] {
            end += 1;
        }
        if end - start + 1 >= min_len.max(1) {
            out.push(Plateau {
                start_g: start + 1,
                end_g: end + 1,
                value: v[start],
            });
        }
        start = end + 1;
    }
    out
}

pub const CURVE_CSV_HEADER: &str = "trial,g,value,kind,unit";

/// Long-format curve CSV: one row per `(trial, g)`.
pub fn write_curves_csv<'a, W, I>(mut w: W, curves: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a GuessCurve>,
{
    writeln!(w, "{CURVE_CSV_HEADER}")?;
    for c in curves {
        let kind = c.kind();
        let unit = c.unit().as_str();
        for (i, v) in c.values().iter().enumerate() {
            writeln!(w, "{},{},{},{},{}", c.meta.trial, i + 1, v, kind, unit)?;
        }
    }
    Ok(())
}

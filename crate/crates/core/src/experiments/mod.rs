//! Named scenarios that replay sampling-attack protocols over real or
//! synthetic datasets and collect curves plus min/median/max summaries.
//!
//! Every random draw is seeded from `(scenario seed, role, dataset, n index,
//! trial)`, so outputs are identical at any thread count.

mod config;
mod output;

use rayon::prelude::*;

pub use config::{
    default_report_g, DatasetRef, DatasetSource, ModeChoice, ReportG, SampleSize, ScenarioConfig,
    ScenarioKind,
};
pub use output::write_outputs;

use crate::curves::{
    attack_curve, gap_curve, optimal_curve, peak, plateaus, reorder, CurveKind, GuessCurve,
    GuessOrder, OrderMode,
};
use crate::dist::rank;
use crate::error::{Error, Result};
use crate::ingest::{load_any, FrequencyTable, StoredDataset};
use crate::sampling::{derive_seed_path, RowSampler, SampleMode, TrialSeed};
use crate::synth::{from_anon_profile, from_profile, generate, preset, tail_profile};

// seed-path roles
const ROLE_DATASET: u64 = 0;
const ROLE_SOURCE: u64 = 1;
const ROLE_TARGET: u64 = 2;
const ROLE_ORDER: u64 = 3;

/// Min, median, mean and max of one reported value across trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub mean: f64,
}

impl Spread {
    /// `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let mid = v.len() / 2;
        let median = if v.len() % 2 == 1 {
            v[mid]
        } else {
            (v[mid - 1] + v[mid]) / 2.0
        };
        Some(Self {
            min: v[0],
            median,
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

/// All curves of one `(target, source, n, label)` combination, one per trial.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    pub target: String,
    pub source: String,
    pub n: u64,
    pub label: String,
    pub curves: Vec<GuessCurve>,
}

impl CurveSet {
    pub fn file_stem(&self) -> String {
        let mut s = format!("curves_{}", clean_name(&self.target));
        if self.source != self.target {
            s += &format!("_from_{}", clean_name(&self.source));
        }
        s += &format!("_n{}", self.n);
        if !self.label.is_empty() {
            s += &format!("_{}", clean_name(&self.label));
        }
        s
    }

    /// Curves of the given kind, in trial order.
    pub fn of_kind(&self, kind: CurveKind) -> impl Iterator<Item = &GuessCurve> {
        self.curves.iter().filter(move |c| c.kind() == kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub target: String,
    pub source: String,
    pub n: u64,
    pub label: String,
    pub kind: CurveKind,
    pub g: ReportG,
    pub trials: usize,
    pub spread: Spread,
}

/// One drawn sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub dataset: String,
    /// `source` samples provide guess orders; `target` samples are attacked.
    pub role: &'static str,
    pub n: u64,
    pub mode: SampleMode,
    pub trial: u64,
    pub users: u64,
    pub unique: u64,
    /// Final value of the attack on this sample's target, when there is one.
    pub successes: Option<f64>,
}

/// Which source did best against a target at one guess count.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingRow {
    pub target: String,
    pub n: u64,
    pub trial: u64,
    pub g: usize,
    /// Sources sharing the lowest gap, joined with `|` when tied.
    pub best: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverRow {
    pub target: String,
    pub n: u64,
    pub trial: u64,
    /// First guess count where `to` is the best source.
    pub g: usize,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlateauRow {
    pub curve: String,
    pub trial: u64,
    /// `peak` for the maximum, `plateau` for a constant run.
    pub what: &'static str,
    pub start_g: usize,
    pub end_g: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub dataset: String,
    pub role: &'static str,
    pub n: u64,
    pub trial: u64,
    pub sample_users: u64,
    pub remainder_users: u64,
    pub source_users: u64,
    pub conserved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub config: ScenarioConfig,
    pub curve_sets: Vec<CurveSet>,
    pub summary: Vec<SummaryRow>,
    pub samples: Vec<SampleRow>,
    pub ranking: Vec<RankingRow>,
    pub crossovers: Vec<CrossoverRow>,
    pub plateaus: Vec<PlateauRow>,
    pub audits: Vec<AuditRow>,
}

impl ScenarioOutput {
    fn new(config: &ScenarioConfig) -> Self {
        Self {
            config: config.clone(),
            curve_sets: Vec::new(),
            summary: Vec::new(),
            samples: Vec::new(),
            ranking: Vec::new(),
            crossovers: Vec::new(),
            plateaus: Vec::new(),
            audits: Vec::new(),
        }
    }

    /// Summary rows matching a target/source/label at guess count `g`.
    pub fn summary_at(&self, target: &str, source: &str, label: &str, g: ReportG) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.target == target && r.source == source && r.label == label && r.g == g)
    }

    pub fn curve_set(&self, target: &str, source: &str, label: &str) -> Option<&CurveSet> {
        self.curve_sets
            .iter()
            .find(|s| s.target == target && s.source == source && s.label == label)
    }

    fn summarize(&mut self, set: &CurveSet, kind: CurveKind) {
        let curves: Vec<&GuessCurve> = set.of_kind(kind).collect();
        for &g in &self.config.report_g {
            let values: Vec<f64> = curves.iter().map(|c| value_at(c, g)).collect();
            if let Some(spread) = Spread::of(&values) {
                self.summary.push(SummaryRow {
                    target: set.target.clone(),
                    source: set.source.clone(),
                    n: set.n,
                    label: set.label.clone(),
                    kind,
                    g,
                    trials: values.len(),
                    spread,
                });
            }
        }
    }
}

/// Curve value at a reported guess count. Past the end of the order the last
/// value is held, since no further guesses are made.
pub fn value_at(curve: &GuessCurve, g: ReportG) -> f64 {
    match g {
        ReportG::At(g) => curve.at_clamped(g),
        ReportG::Max => curve.last(),
    }
}

fn clean_name(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

/// Build or load every dataset of the scenario, in config order.
pub fn materialize(cfg: &ScenarioConfig) -> Result<Vec<FrequencyTable>> {
    cfg.datasets
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let synth_seed = derive_seed_path(cfg.seed, &[ROLE_DATASET, i as u64]);
            let table = match &d.source {
                DatasetSource::Path(p) => match load_any(p)? {
                    StoredDataset::Table(t) => t,
                    StoredDataset::Profile(p) => from_anon_profile(&p)?,
                },
                DatasetSource::Preset(name) => generate(&preset(name, synth_seed)?)?,
                DatasetSource::Synth { spec, seed_fixed } => {
                    let mut spec = spec.clone();
                    if !seed_fixed {
                        spec.seed = synth_seed;
                    }
                    generate(&spec)?
                }
                DatasetSource::TailProfile {
                    heavy,
                    heavy_users,
                    singletons,
                    exponent,
                } => from_profile(&tail_profile(*heavy, *heavy_users, *singletons, *exponent)?)?,
            };
            if table.is_empty() {
                return Err(Error::invalid(format!("dataset {} is empty", d.name)));
            }
            Ok(table)
        })
        .collect()
}

/// Materialize datasets and run the configured scenario.
pub fn run(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    cfg.validate()?;
    let tables = materialize(cfg)?;
    run_on(cfg, &tables)
}

/// Run against already-built datasets (one per `cfg.datasets` entry).
pub fn run_on(cfg: &ScenarioConfig, tables: &[FrequencyTable]) -> Result<ScenarioOutput> {
    cfg.validate()?;
    if tables.len() != cfg.datasets.len() {
        return Err(Error::invalid("one table per configured dataset is required"));
    }
    match cfg.kind {
        ScenarioKind::SelfSample => run_self_sample(cfg, tables),
        ScenarioKind::Ratio => run_ratio(cfg, tables),
        ScenarioKind::SampleVsFull => run_sample_vs_full(cfg, tables),
        ScenarioKind::GapOrderings => run_gap_orderings(cfg, tables),
        ScenarioKind::CrossDataset => run_cross_dataset(cfg, tables),
        ScenarioKind::Remainder => run_remainder(cfg, tables),
    }
}

struct Drawn {
    table: FrequencyTable,
    remainder: Option<FrequencyTable>,
    conserved: bool,
}

fn draw(sampler: &RowSampler, source: &FrequencyTable, mode: SampleMode, n: u64, seed: TrialSeed) -> Result<Drawn> {
    match mode {
        SampleMode::WithReplacement => Ok(Drawn {
            table: sampler.with_replacement(n, seed)?.table,
            remainder: None,
            conserved: true,
        }),
        SampleMode::WithoutReplacement => {
            let split = sampler.without_replacement(n, seed)?;
            let conserved = split.conserves(source);
            Ok(Drawn {
                table: split.sample.table,
                remainder: Some(split.remainder),
                conserved,
            })
        }
    }
}

fn seed(cfg: &ScenarioConfig, role: u64, dataset: usize, n_idx: usize, trial: u64) -> TrialSeed {
    TrialSeed::new(
        derive_seed_path(cfg.seed, &[role, dataset as u64, n_idx as u64]),
        trial,
    )
}

fn single_mode(cfg: &ScenarioConfig) -> SampleMode {
    match cfg.mode {
        ModeChoice::One(m) => m,
        ModeChoice::Both => SampleMode::WithReplacement,
    }
}

fn best_order(sample: &FrequencyTable, name: &str) -> Result<GuessOrder> {
    reorder(&rank(sample)?, OrderMode::Best, None, name)
}

fn sample_row(dataset: &str, role: &'static str, n: u64, mode: SampleMode, trial: u64, t: &FrequencyTable) -> SampleRow {
    SampleRow {
        dataset: dataset.to_string(),
        role,
        n,
        mode,
        trial,
        users: t.total_users(),
        unique: t.unique_count() as u64,
        successes: None,
    }
}

fn audit_row(dataset: &str, role: &'static str, n: u64, trial: u64, d: &Drawn, source: &FrequencyTable) -> Option<AuditRow> {
    d.remainder.as_ref().map(|r| AuditRow {
        dataset: dataset.to_string(),
        role,
        n,
        trial,
        sample_users: d.table.total_users(),
        remainder_users: r.total_users(),
        source_users: source.total_users(),
        conserved: d.conserved,
    })
}

/// One source sample `q_0` per `n` supplies a best-first order that attacks
/// `trials` further samples `q_1..q_t` of the same dataset.
fn self_sample_one(cfg: &ScenarioConfig, out: &mut ScenarioOutput, d: usize, table: &FrequencyTable) -> Result<()> {
    let name = &cfg.datasets[d].name;
    let mode = single_mode(cfg);
    let sampler = RowSampler::new(table);
    for (n_idx, size) in cfg.n.iter().enumerate() {
        let n = size.resolve(table.total_users());
        let tn = cfg.target_n.unwrap_or(*size).resolve(table.total_users());
        let q0 = draw(&sampler, table, mode, n, seed(cfg, ROLE_SOURCE, d, n_idx, 0))?;
        out.samples.push(sample_row(name, "source", n, mode, 0, &q0.table));
        out.audits.extend(audit_row(name, "source", n, 0, &q0, table));
        let order = best_order(&q0.table, name)?;
        let f = optimal_curve(&rank(&q0.table)?, cfg.unit).with_meta(name, name, 0);

        let trials: Vec<(Drawn, GuessCurve)> = (1..=cfg.trials)
            .into_par_iter()
            .map(|t| {
                let q = draw(&sampler, table, mode, tn, seed(cfg, ROLE_TARGET, d, n_idx, t))?;
                let g = attack_curve(&order, &q.table, cfg.unit).with_meta(name, name, t);
                Ok((q, g))
            })
            .collect::<Result<_>>()?;

        let mut set = CurveSet {
            target: name.clone(),
            source: name.clone(),
            n,
            label: String::new(),
            curves: vec![f],
        };
        for (t, (q, g)) in (1..).zip(trials) {
            let mut row = sample_row(name, "target", tn, mode, t, &q.table);
            row.successes = Some(g.last());
            out.samples.push(row);
            out.audits.extend(audit_row(name, "target", tn, t, &q, table));
            set.curves.push(g);
        }
        out.summarize(&set, CurveKind::G);
        out.curve_sets.push(set);
    }
    Ok(())
}

/// Sample-guesses-sample on a single dataset.
pub fn run_self_sample(cfg: &ScenarioConfig, tables: &[FrequencyTable]) -> Result<ScenarioOutput> {
    let mut out = ScenarioOutput::new(cfg);
    self_sample_one(cfg, &mut out, 0, &tables[0])?;
    Ok(out)
}

/// The self-sample protocol on each dataset at the same `n`; the `min`
/// column of the summary is the lowest value over trials.
pub fn run_ratio(cfg: &ScenarioConfig, tables: &[FrequencyTable]) -> Result<ScenarioOutput> {
    let mut out = ScenarioOutput::new(cfg);
    for (d, table) in tables.iter().enumerate() {
        self_sample_one(cfg, &mut out, d, table)?;
    }
    Ok(out)
}

/// Each trial's sample attacks the full dataset it came from.
pub fn run_sample_vs_full(cfg: &ScenarioConfig, tables: &[FrequencyTable]) -> Result<ScenarioOutput> {
    let mut out = ScenarioOutput::new(cfg);
    let table = &tables[0];
    let name = &cfg.datasets[0].name;
    let mode = single_mode(cfg);
    let sampler = RowSampler::new(table);
    let full = rank(table)?;
    for (n_idx, size) in cfg.n.iter().enumerate() {
        let n = size.resolve(table.total_users());
        let trials: Vec<(Drawn, GuessCurve)> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let q = draw(&sampler, table, mode, n, seed(cfg, ROLE_SOURCE, 0, n_idx, t))?;
                let order = best_order(&q.table, name)?;
                Ok((q, attack_curve(&order, table, cfg.unit).with_meta(name, name, t)))
            })
            .collect::<Result<_>>()?;
        let mut set = CurveSet {
            target: name.clone(),
            source: name.clone(),
            n,
            label: String::new(),
            curves: vec![optimal_curve(&full, cfg.unit).with_meta(name, name, 0)],
        };
        for (t, (q, g)) in (0..).zip(trials) {
            let mut row = sample_row(name, "source", n, mode, t, &q.table);
            row.successes = Some(g.last());
            out.samples.push(row);
            out.audits.extend(audit_row(name, "source", n, t, &q, table));
            set.curves.push(g);
        }
        out.summarize(&set, CurveKind::G);
        out.curve_sets.push(set);
    }
    Ok(out)
}

/// Gap curves for best, worst and random orderings of one sample, per
/// replacement mode. Random orderings use one seed per trial.
pub fn run_gap_orderings(cfg: &ScenarioConfig, tables: &[FrequencyTable]) -> Result<ScenarioOutput> {
    let mut out = ScenarioOutput::new(cfg);
    let table = &tables[0];
    let name = &cfg.datasets[0].name;
    let p0 = rank(table)?;
    let sampler = RowSampler::new(table);
    let sizes = if cfg.n.is_empty() { vec![SampleSize::Full] } else { cfg.n.clone() };
    for mode in cfg.mode.modes() {
        for (n_idx, size) in sizes.iter().enumerate() {
            let n = size.resolve(table.total_users());
            // modes draw independently
            let role_dataset = match mode {
                SampleMode::WithReplacement => 0,
                SampleMode::WithoutReplacement => 1,
            };
            let q = draw(&sampler, table, mode, n, seed(cfg, ROLE_SOURCE, role_dataset, n_idx, 0))?;
            out.samples.push(sample_row(name, "source", n, mode, 0, &q.table));
            out.audits.extend(audit_row(name, "source", n, 0, &q, table));
            let ranked = rank(&q.table)?;
            for order_mode in [OrderMode::Best, OrderMode::Worst, OrderMode::Random] {
                let trials: Vec<u64> = match order_mode {
                    OrderMode::Random => (1..=cfg.trials).collect(),
                    _ => vec![0],
                };
                let curves: Vec<GuessCurve> = trials
                    .par_iter()
                    .map(|&t| {
                        let order_seed = (order_mode == OrderMode::Random).then(|| {
                            seed(cfg, ROLE_ORDER, role_dataset, n_idx, t).derived()
                        });
                        let order = reorder(&ranked, order_mode, order_seed, name)?;
                        Ok(gap_curve(&p0, &order, cfg.gap_mode, cfg.unit).with_meta(name, name, t))
                    })
                    .collect::<Result<_>>()?;
                let set = CurveSet {
                    target: name.clone(),
                    source: name.clone(),
                    n,
                    label: format!("{}_{}", mode.as_str(), order_mode.as_str()),
                    curves,
                };
                for c in &set.curves {
                    let stem = set.file_stem();
                    if let Some(p) = peak(c) {
                        out.plateaus.push(PlateauRow {
                            curve: stem.clone(),
                            trial: c.meta.trial,
                            what: "peak",
                            start_g: p.first_g,
                            end_g: p.last_g,
                            value: p.value,
                        });
                    }
                    for run in plateaus(c, cfg.plateau_min_len) {
                        out.plateaus.push(PlateauRow {
                            curve: stem.clone(),
                            trial: c.meta.trial,
                            what: "plateau",
                            start_g: run.start_g,
                            end_g: run.end_g,
                            value: run.value,
                        });
                    }
                }
                out.summarize(&set, CurveKind::H);
                out.curve_sets.push(set);
            }
        }
    }
    Ok(out)
}

/// Samples of every dataset attack every dataset; per target the gap curves
/// are compared to find the best source.
pub fn run_cross_dataset(cfg: &ScenarioConfig, tables: &[FrequencyTable]) -> Result<ScenarioOutput> {
    cross(cfg, tables, false)
}

/// Like [`run_cross_dataset`] with without-replacement splits: a dataset's own
/// sample attacks only the remainder left after removing it.
pub fn run_remainder(cfg: &ScenarioConfig, tables: &[FrequencyTable]) -> Result<ScenarioOutput> {
    cross(cfg, tables, true)
}

fn cross(cfg: &ScenarioConfig, tables: &[FrequencyTable], remainder: bool) -> Result<ScenarioOutput> {
    let mut out = ScenarioOutput::new(cfg);
    let mode = single_mode(cfg);
    let names: Vec<&str> = cfg.datasets.iter().map(|d| d.name.as_str()).collect();
    let samplers: Vec<RowSampler> = tables.iter().map(RowSampler::new).collect();
    let full: Vec<_> = tables.iter().map(rank).collect::<Result<_>>()?;
    for (n_idx, size) in cfg.n.iter().enumerate() {
        let jobs: Vec<(usize, u64)> = (0..tables.len())
            .flat_map(|i| (0..cfg.trials).map(move |t| (i, t)))
            .collect();
        let drawn: Vec<(Drawn, GuessOrder)> = jobs
            .par_iter()
            .map(|&(i, t)| {
                let n = size.resolve(tables[i].total_users());
                let q = draw(&samplers[i], &tables[i], mode, n, seed(cfg, ROLE_SOURCE, i, n_idx, t))?;
                let order = best_order(&q.table, names[i])?;
                Ok((q, order))
            })
            .collect::<Result<_>>()?;
        let at = |i: usize, t: u64| &drawn[i * cfg.trials as usize + t as usize];
        for (&(i, t), (q, _)) in jobs.iter().zip(&drawn) {
            let n = size.resolve(tables[i].total_users());
            out.samples.push(sample_row(names[i], "source", n, mode, t, &q.table));
            out.audits.extend(audit_row(names[i], "source", n, t, q, &tables[i]));
        }

        for (j, target) in names.iter().enumerate() {
            let n_target = size.resolve(tables[j].total_users());
            let mut sets: Vec<CurveSet> = Vec::with_capacity(names.len());
            for (i, source) in names.iter().enumerate() {
                let n = size.resolve(tables[i].total_users());
                let curves: Vec<GuessCurve> = (0..cfg.trials)
                    .into_par_iter()
                    .map(|t| {
                        let (q, order) = at(i, t);
                        let curve = if remainder && i == j {
                            let rest = q.remainder.as_ref().expect("remainder scenarios draw without replacement");
                            if rest.is_empty() {
                                GuessCurve::zeros(order.len(), CurveKind::H, cfg.unit)
                            } else {
                                gap_curve(&rank(rest)?, order, cfg.gap_mode, cfg.unit)
                            }
                        } else {
                            gap_curve(&full[j], order, cfg.gap_mode, cfg.unit)
                        };
                        Ok(curve.with_meta(source, target, t))
                    })
                    .collect::<Result<_>>()?;
                let set = CurveSet {
                    target: target.to_string(),
                    source: source.to_string(),
                    n,
                    label: String::new(),
                    curves,
                };
                out.summarize(&set, CurveKind::H);
                sets.push(set);
            }
            rank_sources(cfg, &mut out, target, n_target, &sets);
            out.curve_sets.extend(sets);
        }
    }
    Ok(out)
}

/// Lowest-gap source(s) among `values`, joined with `|` when tied.
fn best_sources(values: &[(&str, f64)]) -> (String, f64) {
    let best = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let who: Vec<&str> = values.iter().filter(|v| v.1 == best).map(|v| v.0).collect();
    (who.join("|"), best)
}

fn rank_sources(cfg: &ScenarioConfig, out: &mut ScenarioOutput, target: &str, n: u64, sets: &[CurveSet]) {
    for t in 0..cfg.trials as usize {
        let curves: Vec<(&str, &GuessCurve)> = sets
            .iter()
            .map(|s| (s.source.as_str(), &s.curves[t]))
            .collect();
        // compare only where every source still has guesses left
        let common = curves.iter().map(|c| c.1.g_max()).min().unwrap_or(0);
        for &g in &cfg.report_g {
            let g = match g {
                ReportG::At(g) => g,
                ReportG::Max => common,
            };
            if g == 0 {
                continue;
            }
            let values: Vec<(&str, f64)> = curves.iter().map(|c| (c.0, c.1.at_clamped(g))).collect();
            let (best, value) = best_sources(&values);
            out.ranking.push(RankingRow {
                target: target.to_string(),
                n,
                trial: t as u64,
                g,
                best,
                value,
            });
        }
        let mut prev: Option<String> = None;
        for g in 1..=common {
            let values: Vec<(&str, f64)> = curves.iter().map(|c| (c.0, c.1.at_clamped(g))).collect();
            let (best, _) = best_sources(&values);
            if let Some(p) = &prev {
                if *p != best {
                    out.crossovers.push(CrossoverRow {
                        target: target.to_string(),
                        n,
                        trial: t as u64,
                        g,
                        from: p.clone(),
                        to: best.clone(),
                    });
                }
            }
            prev = Some(best);
        }
    }
}

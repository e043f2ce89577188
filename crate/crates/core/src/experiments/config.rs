//! Flat `key = value` scenario files.
//!
//! ```text
//! scenario = self_sample
//! dataset.0.preset = rockyou-like
//! dataset.1.path = leaks/site.lwft
//! dataset.2.synth.vocab = 1000
//! dataset.2.synth.exponent = 1.0
//! dataset.2.synth.users = 5000
//! n = 100, 1000, full
//! trials = 10
//! seed = 42
//! report_g = 10, 100, 1000, max
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::curves::{GapExtension, Unit};
use crate::error::{Error, Result};
use crate::sampling::SampleMode;
use crate::synth::{apply_spec_key, ZipfMandelbrotSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    SelfSample,
    Ratio,
    SampleVsFull,
    GapOrderings,
    CrossDataset,
    Remainder,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::SelfSample => "self_sample",
            ScenarioKind::Ratio => "ratio",
            ScenarioKind::SampleVsFull => "sample_vs_full",
            ScenarioKind::GapOrderings => "gap_orderings",
            ScenarioKind::CrossDataset => "cross_dataset",
            ScenarioKind::Remainder => "remainder",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "self_sample" => ScenarioKind::SelfSample,
            "ratio" => ScenarioKind::Ratio,
            "sample_vs_full" => ScenarioKind::SampleVsFull,
            "gap_orderings" => ScenarioKind::GapOrderings,
            "cross_dataset" => ScenarioKind::CrossDataset,
            "remainder" => ScenarioKind::Remainder,
            other => return Err(Error::invalid(format!("unknown scenario {other:?}"))),
        })
    }

    pub fn default_trials(self) -> u64 {
        match self {
            ScenarioKind::SelfSample | ScenarioKind::Ratio | ScenarioKind::CrossDataset => 10,
            ScenarioKind::SampleVsFull | ScenarioKind::Remainder => 5,
            ScenarioKind::GapOrderings => 1,
        }
    }
}

/// Sample size: a count, or the whole dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSize {
    Count(u64),
    Full,
}

impl SampleSize {
    pub fn resolve(self, total_users: u64) -> u64 {
        match self {
            SampleSize::Count(n) => n,
            SampleSize::Full => total_users,
        }
    }
}

impl fmt::Display for SampleSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleSize::Count(n) => write!(f, "{n}"),
            SampleSize::Full => f.write_str("full"),
        }
    }
}

/// A guess count to report; `Max` is each curve's own last guess.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ReportG {
    At(usize),
    Max,
}

impl fmt::Display for ReportG {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportG::At(g) => write!(f, "{g}"),
            ReportG::Max => f.write_str("max"),
        }
    }
}

/// Which replacement modes a scenario draws with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeChoice {
    One(SampleMode),
    Both,
}

impl ModeChoice {
    pub fn modes(self) -> Vec<SampleMode> {
        match self {
            ModeChoice::One(m) => vec![m],
            ModeChoice::Both => vec![SampleMode::WithReplacement, SampleMode::WithoutReplacement],
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            ModeChoice::One(m) => m.as_str(),
            ModeChoice::Both => "both",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    /// Frequency table or anonymized profile on disk.
    Path(PathBuf),
    Preset(String),
    /// Generator parameters; the seed is derived from the scenario seed
    /// unless `seed_fixed`.
    Synth {
        spec: ZipfMandelbrotSpec,
        seed_fixed: bool,
    },
    /// Counts >= 2 for `heavy` tokens holding `heavy_users`, then `singletons` ones.
    TailProfile {
        heavy: u64,
        heavy_users: u64,
        singletons: u64,
        exponent: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRef {
    pub name: String,
    pub source: DatasetSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub datasets: Vec<DatasetRef>,
    pub n: Vec<SampleSize>,
    /// Size of the target samples in `self_sample`/`ratio`; defaults to `n`.
    pub target_n: Option<SampleSize>,
    pub trials: u64,
    pub seed: u64,
    pub unit: Unit,
    pub gap_mode: GapExtension,
    pub report_g: Vec<ReportG>,
    pub mode: ModeChoice,
    pub plateau_min_len: usize,
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind, datasets: Vec<DatasetRef>, n: Vec<SampleSize>, seed: u64) -> Self {
        Self {
            kind,
            datasets,
            n,
            target_n: None,
            trials: kind.default_trials(),
            seed,
            unit: Unit::Users,
            gap_mode: GapExtension::Truncate,
            report_g: default_report_g(),
            mode: default_mode(kind),
            plateau_min_len: 10,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }

    /// Parse config text. Relative dataset paths resolve against `base_dir`.
    pub fn parse(text: &str, name: &str, base_dir: &Path) -> Result<Self> {
        let mut flat: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format(name, i + 1, "expected key = value"))?;
            let k = k.trim().to_string();
            if flat.contains_key(&k) {
                return Err(Error::format(name, i + 1, format!("duplicate key {k:?}")));
            }
            flat.insert(k, (i + 1, v.trim().to_string()));
        }
        let err = |line: usize, msg: String| Error::format(name, line, msg);

        let (line, kind) = flat
            .get("scenario")
            .ok_or_else(|| err(0, "missing key \"scenario\"".into()))?;
        let kind = ScenarioKind::parse(kind).map_err(|e| err(*line, e.to_string()))?;
        let mut cfg = ScenarioConfig::new(kind, Vec::new(), Vec::new(), 0);

        let mut datasets: BTreeMap<u64, (Option<String>, Option<DatasetSource>, ZipfMandelbrotSpec, bool, bool)> =
            BTreeMap::new();
        for (key, (line, value)) in &flat {
            let line = *line;
            let v = value.as_str();
            match key.as_str() {
                "scenario" => {}
                "n" => cfg.n = parse_list(v, parse_size).map_err(|m| err(line, m))?,
                "target_n" => cfg.target_n = Some(parse_size(v).map_err(|m| err(line, m))?),
                "trials" => cfg.trials = parse_num(key, v).map_err(|m| err(line, m))?,
                "seed" => cfg.seed = parse_num(key, v).map_err(|m| err(line, m))?,
                "unit" => cfg.unit = Unit::parse(v).map_err(|e| err(line, e.to_string()))?,
                "gap_mode" => {
                    cfg.gap_mode = GapExtension::parse(v).map_err(|e| err(line, e.to_string()))?
                }
                "report_g" => cfg.report_g = parse_list(v, parse_report_g).map_err(|m| err(line, m))?,
                "mode" => cfg.mode = parse_mode(v).map_err(|m| err(line, m))?,
                "plateau_min_len" => cfg.plateau_min_len = parse_num(key, v).map_err(|m| err(line, m))?,
                k if k.starts_with("dataset.") => {
                    let rest = &k["dataset.".len()..];
                    let (idx, field) = rest
                        .split_once('.')
                        .ok_or_else(|| err(line, format!("bad dataset key {k:?}")))?;
                    let idx: u64 = idx
                        .parse()
                        .map_err(|_| err(line, format!("bad dataset index in {k:?}")))?;
                    let entry = datasets.entry(idx).or_insert_with(|| {
                        (None, None, ZipfMandelbrotSpec::new(0, 0.0, 0.0, 0, 0), false, false)
                    });
                    let set_source = |slot: &mut Option<DatasetSource>, s: DatasetSource| {
                        if slot.is_some() {
                            return Err(err(line, format!("dataset {idx} has more than one source")));
                        }
                        *slot = Some(s);
                        Ok(())
                    };
                    match field {
                        "name" => entry.0 = Some(v.to_string()),
                        "path" | "profile" => {
                            set_source(&mut entry.1, DatasetSource::Path(base_dir.join(v)))?
                        }
                        "preset" => set_source(&mut entry.1, DatasetSource::Preset(v.to_string()))?,
                        "tail_profile" => {
                            let parts: Vec<&str> = v.split(',').map(str::trim).collect();
                            if !(3..=4).contains(&parts.len()) {
                                return Err(err(
                                    line,
                                    "tail_profile is heavy,heavy_users,singletons[,exponent]".into(),
                                ));
                            }
                            let src = DatasetSource::TailProfile {
                                heavy: parse_num(k, parts[0]).map_err(|m| err(line, m))?,
                                heavy_users: parse_num(k, parts[1]).map_err(|m| err(line, m))?,
                                singletons: parse_num(k, parts[2]).map_err(|m| err(line, m))?,
                                exponent: match parts.get(3) {
                                    Some(e) => parse_num(k, e).map_err(|m| err(line, m))?,
                                    None => 1.0,
                                },
                            };
                            set_source(&mut entry.1, src)?
                        }
                        f if f.starts_with("synth.") => {
                            let sk = &f["synth.".len()..];
                            apply_spec_key(&mut entry.2, sk, v).map_err(|m| err(line, m))?;
                            entry.3 = true;
                            if sk == "seed" {
                                entry.4 = true;
                            }
                        }
                        other => return Err(err(line, format!("unknown dataset field {other:?}"))),
                    }
                }
                other => return Err(err(line, format!("unknown key {other:?}"))),
            }
        }
        if !flat.contains_key("trials") {
            cfg.trials = kind.default_trials();
        }
        if !flat.contains_key("mode") {
            cfg.mode = default_mode(kind);
        }
        for (idx, (dname, source, spec, has_synth, seed_fixed)) in datasets {
            let source = match (source, has_synth) {
                (Some(_), true) => {
                    return Err(err(0, format!("dataset {idx} has more than one source")))
                }
                (Some(s), false) => s,
                (None, true) => {
                    spec.validate()
                        .map_err(|e| err(0, format!("dataset {idx}: {e}")))?;
                    DatasetSource::Synth { spec, seed_fixed }
                }
                (None, false) => return Err(err(0, format!("dataset {idx} has no source"))),
            };
            cfg.datasets.push(DatasetRef {
                name: dname.unwrap_or_else(|| default_name(idx, &source)),
                source,
            });
        }
        cfg.validate().map_err(|e| err(0, e.to_string()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.datasets.is_empty() {
            return Err(Error::invalid("at least one dataset is required"));
        }
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("dataset names must be distinct"));
        }
        if self.report_g.contains(&ReportG::At(0)) {
            return Err(Error::invalid("report_g values must be at least 1"));
        }
        match self.kind {
            ScenarioKind::GapOrderings => {}
            _ if self.n.is_empty() => return Err(Error::invalid("n is required")),
            _ => {}
        }
        if self.n.contains(&SampleSize::Count(0)) {
            return Err(Error::invalid("n must be at least 1"));
        }
        match self.kind {
            ScenarioKind::CrossDataset if self.datasets.len() < 2 => {
                Err(Error::invalid("cross_dataset needs at least two datasets"))
            }
            ScenarioKind::Remainder
                if self.mode != ModeChoice::One(crate::sampling::SampleMode::WithoutReplacement) =>
            {
                Err(Error::invalid("remainder splits are always without replacement"))
            }
            ScenarioKind::SelfSample | ScenarioKind::SampleVsFull if self.datasets.len() != 1 => {
                Err(Error::invalid(format!("{} takes exactly one dataset", self.kind.as_str())))
            }
            ScenarioKind::GapOrderings if self.datasets.len() != 1 => {
                Err(Error::invalid("gap_orderings takes exactly one dataset"))
            }
            _ if self.mode == ModeChoice::Both && self.kind != ScenarioKind::GapOrderings => {
                Err(Error::invalid("mode = both is only meaningful for gap_orderings"))
            }
            _ => Ok(()),
        }
    }

    /// Normalized text form; parsing it gives back the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: Vec<String>| v.join(", ");
        s += &format!("scenario = {}\n", self.kind.as_str());
        for (i, d) in self.datasets.iter().enumerate() {
            s += &format!("dataset.{i}.name = {}\n", d.name);
            match &d.source {
                DatasetSource::Path(p) => s += &format!("dataset.{i}.path = {}\n", p.display()),
                DatasetSource::Preset(p) => s += &format!("dataset.{i}.preset = {p}\n"),
                DatasetSource::Synth { spec, seed_fixed } => {
                    s += &format!("dataset.{i}.synth.vocab = {}\n", spec.vocab_size);
                    s += &format!("dataset.{i}.synth.exponent = {}\n", spec.exponent);
                    s += &format!("dataset.{i}.synth.shift = {}\n", spec.shift);
                    s += &format!("dataset.{i}.synth.users = {}\n", spec.users);
                    s += &format!("dataset.{i}.synth.prefix = {}\n", spec.prefix);
                    s += &format!("dataset.{i}.synth.rank_offset = {}\n", spec.rank_offset);
                    if *seed_fixed {
                        s += &format!("dataset.{i}.synth.seed = {}\n", spec.seed);
                    }
                }
                DatasetSource::TailProfile {
                    heavy,
                    heavy_users,
                    singletons,
                    exponent,
                } => {
                    s += &format!(
                        "dataset.{i}.tail_profile = {heavy}, {heavy_users}, {singletons}, {exponent}\n"
                    )
                }
            }
        }
        if !self.n.is_empty() {
            s += &format!("n = {}\n", join(self.n.iter().map(ToString::to_string).collect()));
        }
        if let Some(t) = self.target_n {
            s += &format!("target_n = {t}\n");
        }
        s += &format!("trials = {}\n", self.trials);
        s += &format!("seed = {}\n", self.seed);
        s += &format!("unit = {}\n", self.unit.as_str());
        s += &format!("gap_mode = {}\n", self.gap_mode.as_str());
        s += &format!(
            "report_g = {}\n",
            join(self.report_g.iter().map(ToString::to_string).collect())
        );
        s += &format!("mode = {}\n", self.mode.as_str());
        s += &format!("plateau_min_len = {}\n", self.plateau_min_len);
        s
    }
}

pub fn default_report_g() -> Vec<ReportG> {
    vec![ReportG::At(10), ReportG::At(100), ReportG::At(1000), ReportG::Max]
}

fn default_mode(kind: ScenarioKind) -> ModeChoice {
    match kind {
        ScenarioKind::Remainder => ModeChoice::One(SampleMode::WithoutReplacement),
        ScenarioKind::GapOrderings => ModeChoice::Both,
        _ => ModeChoice::One(SampleMode::WithReplacement),
    }
}

fn default_name(idx: u64, source: &DatasetSource) -> String {
    match source {
        DatasetSource::Preset(p) => p.clone(),
        DatasetSource::Path(p) => p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("d{idx}")),
        _ => format!("d{idx}"),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("bad value for {key}: {v:?}"))
}

fn parse_list<T>(
    v: &str,
    item: impl Fn(&str) -> std::result::Result<T, String>,
) -> std::result::Result<Vec<T>, String> {
    v.split(',').map(|s| item(s.trim())).collect()
}

fn parse_size(v: &str) -> std::result::Result<SampleSize, String> {
    match v {
        "full" => Ok(SampleSize::Full),
        _ => parse_num("n", v).map(SampleSize::Count),
    }
}

fn parse_report_g(v: &str) -> std::result::Result<ReportG, String> {
    match v {
        "max" => Ok(ReportG::Max),
        _ => parse_num("report_g", v).map(ReportG::At),
    }
}

fn parse_mode(v: &str) -> std::result::Result<ModeChoice, String> {
    match v {
        "with" => Ok(ModeChoice::One(SampleMode::WithReplacement)),
        "without" => Ok(ModeChoice::One(SampleMode::WithoutReplacement)),
        "both" => Ok(ModeChoice::Both),
        other => Err(format!("mode must be with, without or both, not {other:?}")),
    }
}

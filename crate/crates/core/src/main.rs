use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use leakguess::curves::{
    attack_curve, gap_curve, optimal_curve, peak, plateaus, reorder, write_curves_csv, GapExtension,
    OrderMode, Unit,
};
use leakguess::dist::{rank, tail_stats};
use leakguess::experiments::{self, ScenarioConfig};
use leakguess::infotheory::{atypicality_rate, entropy, sanov_report, SanovReport};
use leakguess::ingest::{
    anonymize, escape_token, ingest_file, load_any, write_anon_profile_path,
    write_frequency_table_path, CleanOptions, FrequencyTable, ParseConfig, ParseMode, StoredDataset,
};
use leakguess::sampling::{RowSampler, TrialSeed};
use leakguess::synth::{self, from_profile, generate, tail_profile, ZipfMandelbrotSpec};
use leakguess::{Error, Result};

const FORMATS: &str = "\
File formats:
  raw leak     one record per line, `user<sep>password` (or just the password
               with --mode password-only); lines without a separator are skipped
  .lwft        frequency table: `LWFT1`, `total=<users>`, then `<count>\\t<token>`
               rows, tokens escaped (\\\\, \\t, \\n, \\r, \\xHH)
  .lwap        anonymized profile: `LWAP1`, `total=<users>`, then one count per
               line, non-increasing
Commands reading a dataset accept either .lwft or .lwap files.";

#[derive(Parser, Debug)]
#[command(name = "leakguess", version, about = "Sampling attacks on leaked password datasets", after_help = FORMATS)]
struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CliParseMode {
    UserPassword,
    PasswordOnly,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CliSampleMode {
    With,
    Without,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CliUnit {
    Users,
    Probability,
}

impl From<CliUnit> for Unit {
    fn from(u: CliUnit) -> Self {
        match u {
            CliUnit::Users => Unit::Users,
            CliUnit::Probability => Unit::Probability,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CliOrdering {
    Best,
    Worst,
    Random,
}

impl From<CliOrdering> for OrderMode {
    fn from(o: CliOrdering) -> Self {
        match o {
            CliOrdering::Best => OrderMode::Best,
            CliOrdering::Worst => OrderMode::Worst,
            CliOrdering::Random => OrderMode::Random,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CliGapMode {
    Truncate,
    ExtendOptimal,
}

impl From<CliGapMode> for GapExtension {
    fn from(g: CliGapMode) -> Self {
        match g {
            CliGapMode::Truncate => GapExtension::Truncate,
            CliGapMode::ExtendOptimal => GapExtension::ExtendOptimal,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Clean a raw leak file into a frequency table (last entry per user wins).
    #[command(after_help = FORMATS)]
    Ingest {
        /// Raw leak file.
        input: PathBuf,
        /// Output frequency table (.lwft).
        #[arg(long)]
        out: PathBuf,
        /// Separator between user and password (first occurrence splits).
        #[arg(long, default_value = ":")]
        sep: String,
        #[arg(long, value_enum, default_value = "user-password")]
        mode: CliParseMode,
        /// Keep passwords made only of whitespace.
        #[arg(long)]
        keep_whitespace: bool,
        /// Also write the anonymized profile (.lwap).
        #[arg(long)]
        profile_out: Option<PathBuf>,
    },
    /// Print unique / frequency-1 / frequency>1 / total counts and entropy.
    #[command(after_help = FORMATS)]
    Stats {
        dataset: PathBuf,
        /// Also list the top K ranks (counts only unless --reveal).
        #[arg(long)]
        top: Option<usize>,
        /// Print password tokens in the --top listing.
        #[arg(long)]
        reveal: bool,
    },
    /// Draw seeded samples of user rows from a dataset.
    #[command(after_help = FORMATS)]
    Sample {
        dataset: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        trials: u64,
        #[arg(long, value_enum, default_value = "with")]
        mode: CliSampleMode,
        /// Output table. With several trials, `.t<k>` is inserted before the extension.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the without-replacement remainder too (same naming rule).
        #[arg(long)]
        remainder_out: Option<PathBuf>,
    },
    /// Optimal curve of a dataset, or the attack curve of another dataset's order against it.
    #[command(after_help = FORMATS)]
    Curve {
        /// Dataset whose users are attacked.
        target: PathBuf,
        /// Dataset whose ranking supplies the guess order (default: optimal curve of target).
        #[arg(long)]
        order: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "best")]
        ordering: CliOrdering,
        /// Required for --ordering random.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "users")]
        unit: CliUnit,
    },
    /// Guessing gap of an order against the true distribution.
    #[command(after_help = FORMATS)]
    Gap {
        /// True distribution.
        p0: PathBuf,
        /// Dataset whose ranking supplies the guess order.
        #[arg(long)]
        order: PathBuf,
        #[arg(long, value_enum, default_value = "best")]
        ordering: CliOrdering,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "truncate")]
        gap_mode: CliGapMode,
        #[arg(long, value_enum, default_value = "users")]
        unit: CliUnit,
        /// Print peak and plateaus at least this long instead of the curve.
        #[arg(long)]
        plateaus: Option<usize>,
    },
    /// Sanov bound for a sample size, alphabet size and KL threshold (bits).
    Sanov {
        #[arg(long)]
        n: u64,
        /// Alphabet size; defaults to the unique count of --p0.
        #[arg(long)]
        support: Option<u64>,
        #[arg(long)]
        alpha: f64,
        /// Also estimate the empirical atypicality rate against this dataset.
        #[arg(long)]
        p0: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        /// Required with --p0.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a synthetic dataset (Zipf-Mandelbrot draws, a preset, or a fixed tail profile).
    #[command(after_help = FORMATS)]
    Synth {
        #[arg(long)]
        vocab: Option<u64>,
        #[arg(long)]
        exponent: Option<f64>,
        /// Defaults to 0 (or the preset's value).
        #[arg(long)]
        shift: Option<f64>,
        #[arg(long)]
        users: Option<u64>,
        /// Required unless --tail-profile is used.
        #[arg(long)]
        seed: Option<u64>,
        /// Named preset; explicit flags override its fields.
        #[arg(long)]
        preset: Option<String>,
        /// Deterministic profile `heavy,heavy_users,singletons[,exponent]`.
        #[arg(long, conflicts_with_all = ["vocab", "exponent", "users", "preset"])]
        tail_profile: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario config and write its CSVs and plot script.
    Scenario {
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command, cli.threads) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 1 })
        }
    }
}

fn load_dataset(path: &Path) -> Result<FrequencyTable> {
    match load_any(path)? {
        StoredDataset::Table(t) => Ok(t),
        StoredDataset::Profile(p) => synth::from_anon_profile(&p),
    }
}

fn trial_path(base: &Path, trial: u64, trials: u64) -> PathBuf {
    if trials == 1 {
        return base.to_path_buf();
    }
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}.t{trial}.{}", ext.to_string_lossy()),
        None => format!("{stem}.t{trial}"),
    };
    base.with_file_name(name)
}

fn run(command: Command, threads: Option<usize>) -> Result<()> {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match command {
        Command::Ingest {
            input,
            out: dest,
            sep,
            mode,
            keep_whitespace,
            profile_out,
        } => {
            if sep.is_empty() {
                return Err(Error::InvalidParameter("--sep must not be empty".into()));
            }
            let cfg = ParseConfig {
                separator: sep.into_bytes(),
                mode: match mode {
                    CliParseMode::UserPassword => ParseMode::UserPassword,
                    CliParseMode::PasswordOnly => ParseMode::PasswordOnly,
                },
                ..ParseConfig::default()
            };
            let opts = CleanOptions {
                drop_whitespace: !keep_whitespace,
            };
            let chunks = threads.unwrap_or_else(rayon::current_num_threads);
            let (table, report) = ingest_file(&input, &cfg, opts, chunks)
                .map_err(|e| Error::from(e).with_source_name(&input.display().to_string()))?;
            write_frequency_table_path(&table, &dest)?;
            if let Some(p) = profile_out {
                write_anon_profile_path(&anonymize(&table), &p)?;
            }
            writeln!(out, "lines,skipped,entries,users,dropped_whitespace,unique")?;
            writeln!(
                out,
                "{},{},{},{},{},{}",
                report.lines,
                report.skipped_lines,
                report.entries,
                report.users,
                report.dropped_whitespace,
                table.unique_count()
            )?;
        }
        Command::Stats { dataset, top, reveal } => {
            let table = load_dataset(&dataset)?;
            let d = rank(&table)?;
            let s = tail_stats(&d);
            writeln!(out, "unique,freq1,gt1,total,unique_per_user,users_per_unique,entropy_bits")?;
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.unique_count,
                s.freq1_count,
                s.freq_gt1_count,
                s.total_users,
                s.unique_per_user,
                s.users_per_unique,
                entropy(&d)
            )?;
            if let Some(k) = top {
                writeln!(out)?;
                if reveal {
                    writeln!(out, "rank,count,token")?;
                } else {
                    writeln!(out, "rank,count")?;
                }
                for (i, (tok, c)) in d.entries().iter().take(k).enumerate() {
                    if reveal {
                        let mut esc = Vec::new();
                        escape_token(tok, &mut esc);
                        write!(out, "{},{},", i + 1, c)?;
                        out.write_all(&esc)?;
                        writeln!(out)?;
                    } else {
                        writeln!(out, "{},{}", i + 1, c)?;
                    }
                }
            }
        }
        Command::Sample {
            dataset,
            n,
            seed,
            trials,
            mode,
            out: dest,
            remainder_out,
        } => {
            if trials == 0 {
                return Err(Error::InvalidParameter("--trials must be at least 1".into()));
            }
            let table = load_dataset(&dataset)?;
            let sampler = RowSampler::new(&table);
            writeln!(out, "trial,n,mode,unique,remainder_users")?;
            for t in 0..trials {
                let ts = TrialSeed::new(seed, t);
                let (sample, rest, mode_str) = match mode {
                    CliSampleMode::With => (sampler.with_replacement(n, ts)?.table, None, "with"),
                    CliSampleMode::Without => {
                        let split = sampler.without_replacement(n, ts)?;
                        (split.sample.table, Some(split.remainder), "without")
                    }
                };
                if let Some(d) = &dest {
                    write_frequency_table_path(&sample, &trial_path(d, t, trials))?;
                }
                if let (Some(d), Some(r)) = (&remainder_out, &rest) {
                    write_frequency_table_path(r, &trial_path(d, t, trials))?;
                }
                let rem = rest.map(|r| r.total_users().to_string()).unwrap_or_default();
                writeln!(out, "{t},{n},{mode_str},{},{rem}", sample.unique_count())?;
            }
        }
        Command::Curve {
            target,
            order,
            ordering,
            seed,
            unit,
        } => {
            let table = load_dataset(&target)?;
            let curve = match order {
                None => optimal_curve(&rank(&table)?, unit.into()),
                Some(p) => {
                    let source = load_dataset(&p)?;
                    let o = reorder(&rank(&source)?, ordering.into(), seed, &p.display().to_string())?;
                    attack_curve(&o, &table, unit.into())
                }
            };
            write_curves_csv(&mut out, [&curve])?;
        }
        Command::Gap {
            p0,
            order,
            ordering,
            seed,
            gap_mode,
            unit,
            plateaus: min_len,
        } => {
            let truth = rank(&load_dataset(&p0)?)?;
            let source = load_dataset(&order)?;
            let o = reorder(&rank(&source)?, ordering.into(), seed, &order.display().to_string())?;
            let h = gap_curve(&truth, &o, gap_mode.into(), unit.into());
            match min_len {
                None => write_curves_csv(&mut out, [&h])?,
                Some(len) => {
                    writeln!(out, "what,start_g,end_g,value")?;
                    if let Some(p) = peak(&h) {
                        writeln!(out, "peak,{},{},{}", p.first_g, p.last_g, p.value)?;
                    }
                    for r in plateaus(&h, len) {
                        writeln!(out, "plateau,{},{},{}", r.start_g, r.end_g, r.value)?;
                    }
                }
            }
        }
        Command::Sanov {
            n,
            support,
            alpha,
            p0,
            trials,
            seed,
        } => {
            let table = p0.as_deref().map(load_dataset).transpose()?;
            let support = match (support, &table) {
                (Some(s), _) => s,
                (None, Some(t)) => t.unique_count() as u64,
                (None, None) => {
                    return Err(Error::InvalidParameter("--support or --p0 is required".into()))
                }
            };
            let report = sanov_report(n, support, alpha)?;
            match table {
                None => {
                    writeln!(out, "{}", SanovReport::CSV_HEADER)?;
                    writeln!(out, "{}", report.csv_row())?;
                }
                Some(t) => {
                    let seed = seed.ok_or_else(|| {
                        Error::InvalidParameter("--seed is required with --p0".into())
                    })?;
                    let rate = atypicality_rate(&rank(&t)?, n, alpha, trials, seed)?;
                    writeln!(out, "{},atypicality_rate", SanovReport::CSV_HEADER)?;
                    writeln!(out, "{},{}", report.csv_row(), rate)?;
                }
            }
        }
        Command::Synth {
            vocab,
            exponent,
            shift,
            users,
            seed,
            preset,
            tail_profile: shape,
            out: dest,
        } => {
            let table = if let Some(shape) = shape {
                let parts: Vec<&str> = shape.split(',').map(str::trim).collect();
                let num = |s: &str| {
                    s.parse::<u64>()
                        .map_err(|_| Error::InvalidParameter(format!("bad --tail-profile value {s:?}")))
                };
                if !(3..=4).contains(&parts.len()) {
                    return Err(Error::InvalidParameter(
                        "--tail-profile is heavy,heavy_users,singletons[,exponent]".into(),
                    ));
                }
                let exp = match parts.get(3) {
                    Some(e) => e
                        .parse()
                        .map_err(|_| Error::InvalidParameter(format!("bad exponent {e:?}")))?,
                    None => 1.0,
                };
                from_profile(&tail_profile(num(parts[0])?, num(parts[1])?, num(parts[2])?, exp)?)?
            } else {
                let seed = seed.ok_or_else(|| Error::InvalidParameter("--seed is required".into()))?;
                let mut spec = match &preset {
                    Some(name) => synth::preset(name, seed)?,
                    None => ZipfMandelbrotSpec::new(
                        vocab.ok_or_else(|| Error::InvalidParameter("--vocab is required".into()))?,
                        exponent.ok_or_else(|| Error::InvalidParameter("--exponent is required".into()))?,
                        shift.unwrap_or(0.0),
                        users.ok_or_else(|| Error::InvalidParameter("--users is required".into()))?,
                        seed,
                    ),
                };
                if preset.is_some() {
                    if let Some(v) = vocab {
                        spec.vocab_size = v;
                    }
                    if let Some(e) = exponent {
                        spec.exponent = e;
                    }
                    if let Some(u) = users {
                        spec.users = u;
                    }
                    if let Some(b) = shift {
                        spec.shift = b;
                    }
                }
                generate(&spec)?
            };
            write_frequency_table_path(&table, &dest)?;
            writeln!(out, "unique,total")?;
            writeln!(out, "{},{}", table.unique_count(), table.total_users())?;
        }
        Command::Scenario { config, seed, out: dir } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            cfg.seed = seed;
            let result = experiments::run(&cfg)?;
            let files = experiments::write_outputs(&result, &dir)?;
            for f in files {
                writeln!(out, "{}", dir.join(f).display())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

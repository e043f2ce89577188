use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Seek, SeekFrom};
use std::path::Path;

use rayon::prelude::*;

use super::parse::{strip_delimiter, ParseConfig, RawEntry, UserId};
use super::table::FrequencyTable;

const READ_BUFFER: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CleanOptions {
    /// Drop users whose final password is empty or only space/tab/CR/LF bytes.
    pub drop_whitespace: bool,
}

impl Default for CleanOptions {
    fn default() -> Self {
        Self {
            drop_whitespace: true,
        }
    }
}

pub fn is_whitespace_password(password: &[u8]) -> bool {
    password
        .iter()
        .all(|b| matches!(b, b' ' | b'\t' | b'\r' | b'\n'))
}

/// Diagnostics gathered while turning raw lines into a table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub lines: u64,
    pub skipped_lines: u64,
    pub entries: u64,
    /// Distinct users before the whitespace rule.
    pub users: u64,
    pub dropped_whitespace: u64,
}

/// Partial result of ingesting part of a stream.
///
/// `order` keys only need to be monotone in stream position: sequential
/// ingestion uses line numbers, chunked ingestion uses byte offsets. Merging
/// keeps the entry with the larger key for each named user, so `merge` is
/// associative and commutative.
#[derive(Debug, Default)]
pub struct IngestState {
    anonymous: HashMap<Vec<u8>, u64>,
    named: HashMap<Vec<u8>, (u64, Vec<u8>)>,
    lines: u64,
    skipped: u64,
    entries: u64,
}

impl IngestState {
    pub fn new() -> Self {
        Self::default()
    }

    fn observe_anonymous(&mut self, password: &[u8]) {
        self.entries += 1;
        match self.anonymous.get_mut(password) {
            Some(c) => *c += 1,
            None => {
                self.anonymous.insert(password.to_vec(), 1);
            }
        }
    }

    fn observe_named(&mut self, user: &[u8], password: &[u8], order: u64) {
        self.entries += 1;
        match self.named.get_mut(user) {
            Some(slot) => {
                if order > slot.0 {
                    slot.0 = order;
                    slot.1.clear();
                    slot.1.extend_from_slice(password);
                }
            }
            None => {
                self.named.insert(user.to_vec(), (order, password.to_vec()));
            }
        }
    }

    /// Feed one line (delimiter stripped) with its ordering key.
    pub fn observe_line(&mut self, cfg: &ParseConfig, line: &[u8], order: u64) {
        self.lines += 1;
        match cfg.split_line(line) {
            None => self.skipped += 1,
            Some(fields) => match fields.user {
                None => self.observe_anonymous(fields.password),
                Some(user) => self.observe_named(user, fields.password, order),
            },
        }
    }

    pub fn observe_entry(&mut self, entry: &RawEntry) {
        match &entry.user_id {
            UserId::Line(_) => self.observe_anonymous(&entry.password),
            UserId::Named(user) => self.observe_named(user, &entry.password, entry.line_number),
        }
    }

    pub fn merge(mut self, mut other: IngestState) -> IngestState {
        if self.anonymous.len() < other.anonymous.len() {
            std::mem::swap(&mut self.anonymous, &mut other.anonymous);
        }
        for (password, count) in other.anonymous {
            *self.anonymous.entry(password).or_insert(0) += count;
        }
        if self.named.len() < other.named.len() {
            std::mem::swap(&mut self.named, &mut other.named);
        }
        for (user, (order, password)) in other.named {
            match self.named.get_mut(&user) {
                Some(slot) => {
                    if order > slot.0 {
                        *slot = (order, password);
                    }
                }
                None => {
                    self.named.insert(user, (order, password));
                }
            }
        }
        self.lines += other.lines;
        self.skipped += other.skipped;
        self.entries += other.entries;
        self
    }

    pub fn finish(self, opts: CleanOptions) -> (FrequencyTable, IngestReport) {
        let mut report = IngestReport {
            lines: self.lines,
            skipped_lines: self.skipped,
            entries: self.entries,
            users: self.named.len() as u64,
            dropped_whitespace: 0,
        };
        let mut counts: HashMap<Vec<u8>, u64> = self.anonymous;
        report.users += counts.values().sum::<u64>();
        for (_, (_, password)) in self.named {
            *counts.entry(password).or_insert(0) += 1;
        }
        let mut table = FrequencyTable::new();
        for (password, count) in counts {
            if opts.drop_whitespace && is_whitespace_password(&password) {
                report.dropped_whitespace += count;
            } else {
                table.add(password, count);
            }
        }
        table.debug_check();
        (table, report)
    }
}

/// Apply the cleaning rules to already-parsed entries: the entry with the
/// highest line number wins for each user, then whitespace passwords go.
pub fn clean<'a, I>(entries: I, opts: CleanOptions) -> FrequencyTable
where
    I: IntoIterator<Item = &'a RawEntry>,
{
    let mut state = IngestState::new();
    for e in entries {
        state.observe_entry(e);
    }
    state.finish(opts).0
}

/// Stream-ingest a reader sequentially. Memory is bounded by the number of
/// distinct tokens (plus distinct users in user-password mode).
pub fn ingest_reader<R: Read>(
    reader: R,
    cfg: &ParseConfig,
    opts: CleanOptions,
) -> io::Result<(FrequencyTable, IngestReport)> {
    let mut reader = BufReader::with_capacity(READ_BUFFER, reader);
    let mut state = IngestState::new();
    let mut buf = Vec::with_capacity(256);
    let mut line_number = 0u64;
    loop {
        buf.clear();
        if reader.read_until(cfg.delimiter, &mut buf)? == 0 {
            break;
        }
        line_number += 1;
        state.observe_line(cfg, strip_delimiter(&buf, cfg.delimiter), line_number);
    }
    Ok(state.finish(opts))
}

/// Ingest lines whose first byte lies in `[start, end)`. A line straddling
/// `end` belongs to this range; a line straddling `start` belongs to the
/// previous one.
pub fn ingest_range<R: Read + Seek>(
    source: R,
    start: u64,
    end: u64,
    cfg: &ParseConfig,
) -> io::Result<IngestState> {
    let mut reader = BufReader::with_capacity(READ_BUFFER, source);
    let mut buf = Vec::with_capacity(256);
    let mut pos = start;
    if start > 0 {
        reader.seek(SeekFrom::Start(start - 1))?;
        pos = start - 1 + reader.read_until(cfg.delimiter, &mut buf)? as u64;
    } else {
        reader.seek(SeekFrom::Start(0))?;
    }
    let mut state = IngestState::new();
    while pos < end {
        buf.clear();
        let n = reader.read_until(cfg.delimiter, &mut buf)?;
        if n == 0 {
            break;
        }
        state.observe_line(cfg, strip_delimiter(&buf, cfg.delimiter), pos);
        pos += n as u64;
    }
    Ok(state)
}

/// Split `[0, len)` into `chunks` contiguous byte ranges.
pub fn chunk_bounds(len: u64, chunks: usize) -> Vec<(u64, u64)> {
    let chunks = chunks.max(1) as u64;
    (0..chunks)
        .map(|i| (len * i / chunks, len * (i + 1) / chunks))
        .filter(|(a, b)| a < b)
        .collect()
}

/// Ingest an in-memory buffer split at arbitrary byte boundaries. Produces
/// the same table as sequential ingestion for any split.
pub fn ingest_bytes_chunked(
    data: &[u8],
    bounds: &[(u64, u64)],
    cfg: &ParseConfig,
    opts: CleanOptions,
) -> (FrequencyTable, IngestReport) {
    let state = bounds
        .par_iter()
        .map(|&(a, b)| {
            ingest_range(io::Cursor::new(data), a, b, cfg).expect("in-memory reads cannot fail")
        })
        .reduce(IngestState::new, IngestState::merge);
    state.finish(opts)
}

/// Ingest a file, splitting it into `chunks` byte ranges processed in parallel.
/// `chunks <= 1` streams the file sequentially.
pub fn ingest_file(
    path: &Path,
    cfg: &ParseConfig,
    opts: CleanOptions,
    chunks: usize,
) -> io::Result<(FrequencyTable, IngestReport)> {
    if chunks <= 1 {
        return ingest_reader(File::open(path)?, cfg, opts);
    }
    let len = std::fs::metadata(path)?.len();
    let states = chunk_bounds(len, chunks)
        .into_par_iter()
        .map(|(a, b)| ingest_range(File::open(path)?, a, b, cfg))
        .collect::<io::Result<Vec<_>>>()?;
    let state = states
        .into_iter()
        .fold(IngestState::new(), IngestState::merge);
    Ok(state.finish(opts))
}

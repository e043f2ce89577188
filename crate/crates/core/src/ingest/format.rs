//! On-disk formats.
//!
//! Frequency table (`LWFT1`):
//!
//! ```text
//! LWFT1
//! total=<N>
//! <count>\t<escaped token>
//! ...
//! ```
//!
//! Records are sorted by descending count, then ascending token bytes. Tokens
//! escape backslash, tab, CR and LF as `\\`, `\t`, `\r`, `\n`; every other
//! byte is written raw.
//!
//! Anonymized profile (`LWAP1`): the same two header lines followed by one
//! count per line, non-increasing. No token text.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::table::FrequencyTable;
use crate::error::{Error, Result};

pub const TABLE_MAGIC: &str = "LWFT1";
pub const PROFILE_MAGIC: &str = "LWAP1";

/// Frequency counts with the token text removed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnonProfile {
    descending_counts: Vec<u64>,
    total_users: u64,
}

impl AnonProfile {
    pub fn new(mut counts: Vec<u64>) -> Result<Self> {
        if counts.contains(&0) {
            return Err(Error::invalid("profile counts must be positive"));
        }
        counts.sort_unstable_by(|a, b| b.cmp(a));
        let total_users = counts.iter().sum();
        Ok(Self {
            descending_counts: counts,
            total_users,
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.descending_counts
    }

    pub fn total_users(&self) -> u64 {
        self.total_users
    }
}

/// Drop the token text, keeping sorted counts.
pub fn anonymize(table: &FrequencyTable) -> AnonProfile {
    let mut counts: Vec<u64> = table.iter().map(|(_, c)| c).collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    AnonProfile {
        descending_counts: counts,
        total_users: table.total_users(),
    }
}

pub fn escape_token(token: &[u8], out: &mut Vec<u8>) {
    for &b in token {
        match b {
            b'\\' => out.extend_from_slice(b"\\\\"),
            b'\t' => out.extend_from_slice(b"\\t"),
            b'\r' => out.extend_from_slice(b"\\r"),
            b'\n' => out.extend_from_slice(b"\\n"),
            _ => out.push(b),
        }
    }
}

pub fn unescape_token(escaped: &[u8]) -> std::result::Result<Vec<u8>, String> {
    let mut out = Vec::with_capacity(escaped.len());
    let mut it = escaped.iter();
    while let Some(&b) = it.next() {
        match b {
            b'\\' => match it.next() {
                Some(b'\\') => out.push(b'\\'),
                Some(b't') => out.push(b'\t'),
                Some(b'r') => out.push(b'\r'),
                Some(b'n') => out.push(b'\n'),
                Some(&other) => return Err(format!("unknown escape \\{}", other as char)),
                None => return Err("dangling backslash".to_string()),
            },
            b'\t' | b'\r' | b'\n' => return Err("unescaped control byte in token".to_string()),
            _ => out.push(b),
        }
    }
    Ok(out)
}

/// Table entries in file order: descending count, then ascending token bytes.
pub fn sorted_records(table: &FrequencyTable) -> Vec<(&[u8], u64)> {
    let mut records: Vec<(&[u8], u64)> = table.iter().collect();
    // table iteration is already byte-ordered, so a stable sort on count suffices
    records.sort_by(|a, b| b.1.cmp(&a.1));
    records
}

pub fn write_frequency_table<W: Write>(table: &FrequencyTable, dest: W) -> io::Result<()> {
    let mut w = BufWriter::new(dest);
    writeln!(w, "{TABLE_MAGIC}")?;
    writeln!(w, "total={}", table.total_users())?;
    let mut line = Vec::with_capacity(64);
    for (token, count) in sorted_records(table) {
        line.clear();
        line.extend_from_slice(count.to_string().as_bytes());
        line.push(b'\t');
        escape_token(token, &mut line);
        line.push(b'\n');
        w.write_all(&line)?;
    }
    w.flush()
}

fn read_header<R: BufRead>(
    reader: &mut R,
    magic: &str,
    name: &str,
    buf: &mut Vec<u8>,
) -> Result<u64> {
    buf.clear();
    reader.read_until(b'\n', buf)?;
    if strip_newline(buf) != magic.as_bytes() {
        return Err(Error::format(name, 1, format!("expected magic header {magic}")));
    }
    buf.clear();
    reader.read_until(b'\n', buf)?;
    let line = strip_newline(buf);
    let total = line
        .strip_prefix(b"total=")
        .and_then(parse_u64)
        .ok_or_else(|| Error::format(name, 2, "expected total=<N>"))?;
    Ok(total)
}

fn strip_newline(buf: &[u8]) -> &[u8] {
    buf.strip_suffix(b"\n").unwrap_or(buf)
}

fn parse_u64(s: &[u8]) -> Option<u64> {
    std::str::from_utf8(s).ok()?.parse().ok()
}

/// Load a frequency table. `name` labels errors (usually the file path).
pub fn load_frequency_table<R: BufRead>(mut src: R, name: &str) -> Result<FrequencyTable> {
    let mut buf = Vec::new();
    let total = read_header(&mut src, TABLE_MAGIC, name, &mut buf)?;
    let mut table = FrequencyTable::new();
    let mut line_no = 2;
    loop {
        buf.clear();
        if src.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = strip_newline(&buf);
        let tab = memchr::memchr(b'\t', line)
            .ok_or_else(|| Error::format(name, line_no, "expected <count><TAB><token>"))?;
        let count = parse_u64(&line[..tab])
            .filter(|&c| c > 0)
            .ok_or_else(|| Error::format(name, line_no, "count must be a positive integer"))?;
        let token =
            unescape_token(&line[tab + 1..]).map_err(|m| Error::format(name, line_no, m))?;
        if table.contains(&token) {
            return Err(Error::format(name, line_no, "duplicate token"));
        }
        table.add(token, count);
    }
    if table.total_users() != total {
        return Err(Error::format(
            name,
            2,
            format!("header total {total} != sum of counts {}", table.total_users()),
        ));
    }
    Ok(table)
}

pub fn write_anon_profile<W: Write>(profile: &AnonProfile, dest: W) -> io::Result<()> {
    let mut w = BufWriter::new(dest);
    writeln!(w, "{PROFILE_MAGIC}")?;
    writeln!(w, "total={}", profile.total_users())?;
    for c in profile.counts() {
        writeln!(w, "{c}")?;
    }
    w.flush()
}

pub fn load_anon_profile<R: BufRead>(mut src: R, name: &str) -> Result<AnonProfile> {
    let mut buf = Vec::new();
    let total = read_header(&mut src, PROFILE_MAGIC, name, &mut buf)?;
    let mut counts = Vec::new();
    let mut line_no = 2;
    loop {
        buf.clear();
        if src.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let c = parse_u64(strip_newline(&buf))
            .filter(|&c| c > 0)
            .ok_or_else(|| Error::format(name, line_no, "count must be a positive integer"))?;
        if counts.last().is_some_and(|&prev| prev < c) {
            return Err(Error::format(name, line_no, "counts must be non-increasing"));
        }
        counts.push(c);
    }
    let sum: u64 = counts.iter().sum();
    if sum != total {
        return Err(Error::format(
            name,
            2,
            format!("header total {total} != sum of counts {sum}"),
        ));
    }
    Ok(AnonProfile {
        descending_counts: counts,
        total_users: total,
    })
}

/// Either persistent dataset kind, detected by its magic line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoredDataset {
    Table(FrequencyTable),
    Profile(AnonProfile),
}

pub fn load_any(path: &Path) -> Result<StoredDataset> {
    let name = path.display().to_string();
    let mut reader = BufReader::new(File::open(path).map_err(|e| Error::from(e).with_source_name(&name))?);
    let head = reader.fill_buf()?;
    if head.starts_with(PROFILE_MAGIC.as_bytes()) {
        load_anon_profile(reader, &name).map(StoredDataset::Profile)
    } else {
        load_frequency_table(reader, &name).map(StoredDataset::Table)
    }
}

pub fn load_frequency_table_path(path: &Path) -> Result<FrequencyTable> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::from(e).with_source_name(&name))?;
    load_frequency_table(BufReader::new(file), &name)
}

pub fn write_frequency_table_path(table: &FrequencyTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::from(e).with_source_name(&path.display().to_string()))?;
    Ok(write_frequency_table(table, file)?)
}

pub fn write_anon_profile_path(profile: &AnonProfile, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::from(e).with_source_name(&path.display().to_string()))?;
    Ok(write_anon_profile(profile, file)?)
}

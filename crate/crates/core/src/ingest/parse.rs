use std::io::{self, BufRead};

use memchr::memmem;

/// How each raw line maps onto a user and a password.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    /// `<user><sep><password>`; the password is everything after the first separator.
    UserPassword,
    /// Every line is a password held by a distinct, anonymous user.
    PasswordOnly,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseConfig {
    pub delimiter: u8,
    pub separator: Vec<u8>,
    pub mode: ParseMode,
}

impl Default for ParseConfig {
    fn default() -> Self {
        Self {
            delimiter: b'\n',
            separator: b":".to_vec(),
            mode: ParseMode::UserPassword,
        }
    }
}

impl ParseConfig {
    pub fn password_only() -> Self {
        Self {
            mode: ParseMode::PasswordOnly,
            ..Self::default()
        }
    }

    /// Split one line (delimiter already stripped). `None` means the line is
    /// malformed for this mode and must be skipped.
    pub fn split_line<'a>(&self, line: &'a [u8]) -> Option<LineFields<'a>> {
        match self.mode {
            ParseMode::PasswordOnly => Some(LineFields {
                user: None,
                password: line,
            }),
            ParseMode::UserPassword => {
                let at = find_separator(&self.separator, line)?;
                Some(LineFields {
                    user: Some(&line[..at]),
                    password: &line[at + self.separator.len()..],
                })
            }
        }
    }
}

fn find_separator(sep: &[u8], line: &[u8]) -> Option<usize> {
    match sep {
        [] => None,
        [b] => memchr::memchr(*b, line),
        _ => memmem::find(line, sep),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineFields<'a> {
    pub user: Option<&'a [u8]>,
    pub password: &'a [u8],
}

/// User identity of a raw entry. Password-only dumps get one synthetic user per line.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum UserId {
    Named(Vec<u8>),
    Line(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEntry {
    pub user_id: UserId,
    pub password: Vec<u8>,
    /// 1-indexed position of the line in its stream.
    pub line_number: u64,
}

/// Strip one trailing delimiter, if present.
pub(crate) fn strip_delimiter(buf: &[u8], delimiter: u8) -> &[u8] {
    match buf.split_last() {
        Some((&last, rest)) if last == delimiter => rest,
        _ => buf,
    }
}

/// Streaming line parser. Memory use is one line buffer.
pub struct LeakReader<R> {
    reader: R,
    cfg: ParseConfig,
    buf: Vec<u8>,
    line_number: u64,
    skipped: u64,
}

impl<R: BufRead> LeakReader<R> {
    pub fn new(reader: R, cfg: ParseConfig) -> Self {
        Self {
            reader,
            cfg,
            buf: Vec::with_capacity(256),
            line_number: 0,
            skipped: 0,
        }
    }

    /// Lines lacking a separator in user-password mode.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn lines_read(&self) -> u64 {
        self.line_number
    }

    pub fn next_entry(&mut self) -> io::Result<Option<RawEntry>> {
        loop {
            self.buf.clear();
            if self.reader.read_until(self.cfg.delimiter, &mut self.buf)? == 0 {
                return Ok(None);
            }
            self.line_number += 1;
            let line = strip_delimiter(&self.buf, self.cfg.delimiter);
            match self.cfg.split_line(line) {
                Some(fields) => {
                    let user_id = match fields.user {
                        Some(u) => UserId::Named(u.to_vec()),
                        None => UserId::Line(self.line_number),
                    };
                    return Ok(Some(RawEntry {
                        user_id,
                        password: fields.password.to_vec(),
                        line_number: self.line_number,
                    }));
                }
                None => self.skipped += 1,
            }
        }
    }
}

impl<R: BufRead> Iterator for LeakReader<R> {
    type Item = io::Result<RawEntry>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_entry().transpose()
    }
}

/// Entries of a fully parsed stream plus the malformed-line count.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedLeak {
    pub entries: Vec<RawEntry>,
    pub skipped: u64,
}

/// Parse a whole stream into memory. Large dumps should go through
/// [`LeakReader`] or the streaming ingest functions instead.
pub fn parse_leak_file<R: BufRead>(stream: R, cfg: &ParseConfig) -> io::Result<ParsedLeak> {
    let mut reader = LeakReader::new(stream, cfg.clone());
    let mut entries = Vec::new();
    while let Some(e) = reader.next_entry()? {
        entries.push(e);
    }
    Ok(ParsedLeak {
        entries,
        skipped: reader.skipped(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(data: &[u8], cfg: &ParseConfig) -> ParsedLeak {
        parse_leak_file(data, cfg).unwrap()
    }

    #[test]
    fn password_keeps_later_separators() {
        let out = parse(b"alice:pw:1\n", &ParseConfig::default());
        assert_eq!(out.entries.len(), 1);
        assert_eq!(out.entries[0].user_id, UserId::Named(b"alice".to_vec()));
        assert_eq!(out.entries[0].password, b"pw:1");
    }

    #[test]
    fn password_only_synthesizes_users() {
        let out = parse(b"raw\nraw\n", &ParseConfig::password_only());
        assert_eq!(out.entries[0].password, b"raw");
        assert_eq!(out.entries[0].user_id, UserId::Line(1));
        assert_eq!(out.entries[1].user_id, UserId::Line(2));
    }

    #[test]
    fn missing_separator_is_skipped_not_fatal() {
        let out = parse(b"a:x\nnoseparator\nb:y", &ParseConfig::default());
        assert_eq!(out.entries.len(), 2);
        assert_eq!(out.skipped, 1);
        assert_eq!(out.entries[1].line_number, 3);
        assert_eq!(out.entries[1].password, b"y");
    }

    #[test]
    fn bytes_are_preserved() {
        let out = parse(b"u:\xff\xfe pw\r\n", &ParseConfig::default());
        assert_eq!(out.entries[0].password, b"\xff\xfe pw\r");
    }

    #[test]
    fn custom_delimiter_and_multibyte_separator() {
        let cfg = ParseConfig {
            delimiter: 0,
            separator: b"::".to_vec(),
            mode: ParseMode::UserPassword,
        };
        let out = parse(b"a::b:c\0x:y\0", &cfg);
        assert_eq!(out.entries.len(), 1);
        assert_eq!(out.entries[0].password, b"b:c");
        assert_eq!(out.skipped, 1);
    }

    #[test]
    fn line_numbers_increase() {
        let out = parse(b"a:1\nb:2\n\nc:3\n", &ParseConfig::default());
        let lines: Vec<u64> = out.entries.iter().map(|e| e.line_number).collect();
        assert_eq!(lines, vec![1, 2, 4]);
        assert_eq!(out.skipped, 1);
    }
}

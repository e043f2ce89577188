//! Raw leak parsing, cleaning, and the persistent table/profile formats.

mod clean;
mod format;
mod parse;
mod table;

pub use clean::{
    chunk_bounds, clean, ingest_bytes_chunked, ingest_file, ingest_range, ingest_reader,
    is_whitespace_password, CleanOptions, IngestReport, IngestState,
};
pub use format::{
    anonymize, escape_token, load_anon_profile, load_any, load_frequency_table,
    load_frequency_table_path, sorted_records, unescape_token, write_anon_profile,
    write_anon_profile_path, write_frequency_table, write_frequency_table_path, AnonProfile,
    StoredDataset, PROFILE_MAGIC, TABLE_MAGIC,
};
pub use parse::{
    parse_leak_file, LeakReader, LineFields, ParseConfig, ParseMode, ParsedLeak, RawEntry, UserId,
};
pub use table::{FrequencyTable, Token};

//! Guessing-curve analysis for leaked credential datasets.
//!
//! Leak files are cleaned into token frequency tables, ranked, sampled and
//! turned into optimal, attack and gap curves. Synthetic heavy-tailed data and
//! scenario runners sit on top.

pub mod curves;
pub mod dist;
pub mod error;
pub mod experiments;
pub mod infotheory;
pub mod ingest;
pub mod sampling;
pub mod synth;

pub use error::{Error, Result};

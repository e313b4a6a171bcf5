//! Knowledge-guided lexica for regional construct measurement.
//!
//! The crate turns a handful of expert seed words into a weighted lexicon by
//! expanding them through a static word-embedding space and pruning the result
//! to internal coherence against a regional corpus. It then scores regions,
//! validates the scores against external indicators, and interpolates scores
//! for regions without data using Gaussian-process regression.
//!
//! Everything here is pure computation over in-memory data and builds without
//! `std` (only `alloc` is required). File formats, parallel ingestion and the
//! command-line front end live in the companion `kgl` crate.
//!
//! Module map:
//! - [`embedding`]: embedding table, cosine similarity, exact neighbor scans.
//! - [`corpus`]: tokenizer, region identifiers, per-region counts.
//! - [`lexicon`]: seed sets, synonym/concept expansion, frequency pruning,
//!   correlation purification.
//! - [`scoring`]: weighted frequency matrix, region scores, aggregation,
//!   normalization, community summaries.
//! - [`stats`]: Pearson correlation with t-test p-values, Cronbach's alpha,
//!   indicator subset search, bootstrap correlation differences.
//! - [`gp`]: ARD squared-exponential GP regression for kriging.
//! - [`synth`]: planted-signal synthetic datasets used as end-to-end oracles.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod embedding;
pub mod gp;
mod linalg;
pub mod lexicon;
pub mod scoring;
mod special;
pub mod stats;
pub mod synth;

pub use corpus::{tokenize, CountMode, Document, PhraseSet, RegionCounts, RegionId};
pub use embedding::{cosine, EmbeddingTable, Similarity};
pub use lexicon::{Lexicon, LexiconConfig, LexiconEntry, Origin, SeedSet};
pub use scoring::{Normalization, RegionFrequencyMatrix, ScoreRow, ScoreTable};
pub use stats::{pearson, CorrelationResult};

/// Version tag of the tokenizer rules, echoed into output metadata.
pub const TOKENIZER_VERSION: &str = "kgl-tok-1";

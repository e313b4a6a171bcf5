//! Subcommand implementations. Each takes the effective config, writes its
//! outputs plus a manifest into the output directory, and returns a summary.

pub mod ablate;
pub mod build;
pub mod interpolate;
pub mod score;
pub mod synth;
pub mod validate;

use std::collections::BTreeMap;

use kgl_core::corpus::{PhraseSet, RegionCounts};
use kgl_core::scoring::{aggregate_to_state, region_scores, weighted_frequency_matrix};
use kgl_core::lexicon::{expand, prune, LexiconError};
use kgl_core::{EmbeddingTable, Lexicon, LexiconConfig, Normalization, RegionId, ScoreTable, SeedSet};

use crate::config::RunConfig;
use crate::error::{KglError, Result};
use crate::io;
use crate::manifest::Recorder;

pub fn lexicon_file(construct: &str) -> String {
    format!("lexicon_{construct}.csv")
}

/// Seed sets from `paths.seeds`, optionally restricted to one construct.
pub(crate) fn load_seeds(cfg: &RunConfig, rec: &mut Recorder, only: Option<&str>) -> Result<Vec<SeedSet>> {
    if cfg.paths.seeds.is_empty() {
        return Err(KglError::config("paths.seeds is empty"));
    }
    let mut out: Vec<SeedSet> = Vec::new();
    for p in &cfg.paths.seeds {
        let full = cfg.require("seeds", &Some(p.clone()))?;
        let set = io::tables::read_seeds(&full)?;
        if only.is_some_and(|c| c != set.construct()) {
            continue;
        }
        if out.iter().any(|s| s.construct() == set.construct()) {
            return Err(KglError::input(&full, format!("construct {} defined twice", set.construct())));
        }
        rec.input(cfg, p)?;
        out.push(set);
    }
    if let Some(c) = only {
        if out.is_empty() {
            return Err(KglError::config(format!("no seed file defines construct {c:?}")));
        }
    }
    Ok(out)
}

pub(crate) fn load_embeddings(cfg: &RunConfig, rec: &mut Recorder) -> Result<EmbeddingTable> {
    let path = cfg.require("embeddings", &cfg.paths.embeddings)?;
    rec.input(cfg, cfg.paths.embeddings.as_ref().expect("checked"))?;
    log::info!("loading embeddings from {}", path.display());
    io::embeddings::read_embeddings(&path)
}

/// Region counts from raw documents (with phrase counting) or a precomputed table.
pub(crate) fn load_counts(cfg: &RunConfig, rec: &mut Recorder, phrases: &PhraseSet) -> Result<RegionCounts> {
    if let Some(doc_path) = &cfg.paths.documents {
        let full = cfg.require("documents", &cfg.paths.documents)?;
        rec.input(cfg, doc_path)?;
        let shards = cfg.corpus.shards.unwrap_or_else(io::corpus::default_shards);
        let mut ing = io::corpus::ingest_documents(&full, phrases, shards)?;
        let dropped = ing.counts.retain_min_documents(cfg.corpus.min_documents);
        if !ing.rejected.is_empty() {
            log::warn!("{} document lines rejected; see ingest_errors.csv", ing.rejected.len());
        }
        io::corpus::write_rejected(&cfg.output("ingest_errors.csv"), &ing.rejected)?;
        rec.output("ingest_errors.csv");
        rec.detail("documents", ing.documents);
        rec.detail("rejected_lines", ing.rejected.len());
        rec.detail("regions_below_document_floor", dropped.iter().map(|r| r.to_string()).collect::<Vec<_>>());
        Ok(ing.counts)
    } else if let Some(count_path) = &cfg.paths.counts {
        let full = cfg.require("counts", &cfg.paths.counts)?;
        rec.input(cfg, count_path)?;
        io::corpus::load_region_counts(&full)
    } else {
        Err(KglError::config("set paths.documents or paths.counts"))
    }
}

pub(crate) fn phrase_set<'a>(lexica: impl IntoIterator<Item = &'a Lexicon>) -> PhraseSet {
    let mut set = PhraseSet::default();
    for lex in lexica {
        for p in lex.phrases() {
            set.insert(p).expect("lexicon phrases have at least two words");
        }
    }
    set
}

pub(crate) fn score(lex: &Lexicon, counts: &RegionCounts, mode: Normalization) -> ScoreTable {
    region_scores(&weighted_frequency_matrix(lex, counts, mode), lex.construct())
}

pub(crate) fn load_mappings(cfg: &RunConfig, rec: &mut Recorder) -> Result<Option<BTreeMap<RegionId, RegionId>>> {
    match &cfg.paths.mappings {
        None => Ok(None),
        Some(p) => {
            let full = cfg.require("mappings", &cfg.paths.mappings)?;
            rec.input(cfg, p)?;
            io::tables::read_mappings(&full).map(Some)
        }
    }
}

/// State-level scores: county rows averaged through the mapping, state rows kept.
pub(crate) fn to_state(cfg: &RunConfig, scores: &ScoreTable, mapping: Option<&BTreeMap<RegionId, RegionId>>) -> Result<ScoreTable> {
    let (counties, states): (Vec<_>, Vec<_>) = scores.rows.iter().cloned().partition(|r| r.region.is_county());
    let mut out = ScoreTable::new(states);
    if !counties.is_empty() {
        let mapping = mapping.ok_or_else(|| KglError::config("county scores need paths.mappings for state aggregation"))?;
        let agg = aggregate_to_state(&ScoreTable::new(counties), mapping).map_err(|e| KglError::input(&cfg.resolve(cfg.paths.mappings.as_ref().expect("mapping present")), e))?;
        out.extend(agg);
    }
    Ok(out)
}

/// Expansion failures are config errors for bad thresholds and input errors otherwise.
pub(crate) fn expand_error(cfg: &RunConfig, e: LexiconError) -> KglError {
    match e {
        LexiconError::InvalidConfig(_) => KglError::config(e),
        _ => match &cfg.paths.embeddings {
            Some(p) => KglError::input(&cfg.resolve(p), e),
            None => KglError::config(e),
        },
    }
}

pub(crate) fn prune_error(construct: &str, e: LexiconError) -> KglError {
    KglError::numeric(format!("{construct}: {e}"))
}

/// Seeds-only or full lexica for every seed set, sharing one corpus pass.
pub(crate) fn build_lexica(
    cfg: &RunConfig,
    rec: &mut Recorder,
    lex_cfg: &LexiconConfig,
    seeds: &[SeedSet],
    table: &EmbeddingTable,
) -> Result<(Vec<Lexicon>, RegionCounts)> {
    let mut expanded = Vec::new();
    for s in seeds {
        expanded.push(expand(lex_cfg, table, s).map_err(|e| expand_error(cfg, e))?);
    }
    let counts = load_counts(cfg, rec, &phrase_set(expanded.iter().map(|(l, _)| l)))?;
    let mut out = Vec::new();
    for (lex, mut report) in expanded {
        out.push(prune(lex_cfg, &lex, &counts, &mut report).map_err(|e| prune_error(lex.construct(), e))?);
    }
    Ok((out, counts))
}

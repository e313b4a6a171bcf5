//! Seed expansion and coherence purification.
//!
//! A lexicon starts as an expert seed set (weight 1 each). Synonym expansion
//! adds the embedding neighbors of every seed; concept expansion adds the
//! neighbors of the seed centroid. Expanded words carry their cosine
//! similarity as weight. Purification then drops rare words and, one at a
//! time, the word whose regional weighted frequency correlates worst with the
//! summed frequency of the rest of the lexicon, until every word clears the
//! threshold.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::corpus::RegionCounts;
use crate::embedding::{EmbeddingError, EmbeddingTable};
use crate::scoring::{Normalization, RegionFrequencyMatrix};
use crate::stats::correlation;

/// Expansion weights stay strictly below the seed weight.
pub const WEIGHT_CAP: f64 = 1.0 - 1e-9;

/// Source tag for concept-expansion entries.
pub const CENTROID: &str = "centroid";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LexiconError {
    #[error("seed set for {0:?} is empty")]
    EmptySeeds(String),
    #[error("duplicate seed {0:?}")]
    DuplicateSeed(String),
    #[error("construct name is empty")]
    EmptyConstruct,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("purification needs at least 3 regions, have {0}")]
    TooFewRegions(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no seed of {0:?} resolves in the embedding table")]
    NoResolvableSeeds(String),
}

/// Expert-provided entries for one construct.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSet {
    construct: String,
    entries: Vec<String>,
}

impl SeedSet {
    /// Entries are trimmed, lowercased and must be unique.
    pub fn new<S: AsRef<str>>(construct: &str, entries: impl IntoIterator<Item = S>) -> Result<Self, LexiconError> {
        let construct = construct.trim();
        if construct.is_empty() {
            return Err(LexiconError::EmptyConstruct);
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for e in entries {
            let e = e.as_ref().split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
            if e.is_empty() {
                continue;
            }
            if !seen.insert(e.clone()) {
                return Err(LexiconError::DuplicateSeed(e));
            }
            out.push(e);
        }
        if out.is_empty() {
            return Err(LexiconError::EmptySeeds(construct.to_string()));
        }
        Ok(Self {
            construct: construct.to_string(),
            entries: out,
        })
    }

    pub fn construct(&self) -> &str {
        &self.construct
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    /// Tokens a neighbor query must not return: every seed and its underscore form.
    fn exclusions(&self) -> BTreeSet<String> {
        let mut ex = BTreeSet::new();
        for e in &self.entries {
            ex.insert(e.clone());
            ex.insert(e.replace(' ', "_"));
        }
        ex
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Origin {
    Seed,
    Synonym,
    Concept,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Seed => "seed",
            Origin::Synonym => "synonym-expansion",
            Origin::Concept => "concept-expansion",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "seed" => Some(Origin::Seed),
            "synonym-expansion" | "synonym" => Some(Origin::Synonym),
            "concept-expansion" | "concept" => Some(Origin::Concept),
            _ => None,
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub word: String,
    pub weight: f64,
    pub origin: Origin,
    /// Seed that produced the entry, or [`CENTROID`].
    pub source: String,
}

impl LexiconEntry {
    pub fn seed(word: &str) -> Self {
        Self {
            word: word.to_string(),
            weight: 1.0,
            origin: Origin::Seed,
            source: word.to_string(),
        }
    }

    /// Whether `self` wins a collision against `other` for the same word.
    fn beats(&self, other: &LexiconEntry) -> bool {
        match self.weight.partial_cmp(&other.weight) {
            Some(Ordering::Greater) => true,
            Some(Ordering::Less) => false,
            _ => (self.origin, &self.source) < (other.origin, &other.source),
        }
    }
}

/// Thresholds and embedding identity a lexicon was built with.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub tau_syn: Option<f64>,
    pub tau_con: Option<f64>,
    pub theta: Option<f64>,
    pub embedding_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    construct: String,
    entries: BTreeMap<String, LexiconEntry>,
    pub provenance: Provenance,
}

impl Lexicon {
    pub fn new(construct: &str) -> Self {
        Self {
            construct: construct.to_string(),
            entries: BTreeMap::new(),
            provenance: Provenance::default(),
        }
    }

    /// Builds a lexicon from entries, resolving duplicate words by the merge rule.
    pub fn from_entries(construct: &str, entries: impl IntoIterator<Item = LexiconEntry>) -> Self {
        let mut lex = Self::new(construct);
        for e in entries {
            lex.offer(e);
        }
        lex
    }

    fn offer(&mut self, e: LexiconEntry) {
        match self.entries.get(&e.word) {
            Some(cur) if !e.beats(cur) => {}
            _ => {
                self.entries.insert(e.word.clone(), e);
            }
        }
    }

    pub fn construct(&self) -> &str {
        &self.construct
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in word order.
    pub fn entries(&self) -> impl Iterator<Item = &LexiconEntry> {
        self.entries.values()
    }

    pub fn get(&self, word: &str) -> Option<&LexiconEntry> {
        self.entries.get(word)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn remove(&mut self, word: &str) -> Option<LexiconEntry> {
        self.entries.remove(word)
    }

    /// Multi-word entries, which need phrase counting in the corpus.
    pub fn phrases(&self) -> impl Iterator<Item = &str> {
        self.words().filter(|w| w.contains(' '))
    }

    /// Entries by descending weight, then word.
    pub fn sorted(&self) -> Vec<&LexiconEntry> {
        let mut v: Vec<&LexiconEntry> = self.entries.values().collect();
        v.sort_by(|a, b| b.weight.partial_cmp(&a.weight).unwrap_or(Ordering::Equal).then(a.word.cmp(&b.word)));
        v
    }

    pub fn weights(&self) -> Vec<(&str, f64)> {
        self.entries.values().map(|e| (e.word.as_str(), e.weight)).collect()
    }
}

/// What to do with a seed that does not resolve in the embedding table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnresolvedPolicy {
    #[default]
    Error,
    /// Skip the seed for expansion (it stays in the lexicon) and report it.
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconConfig {
    pub tau_syn: f64,
    pub tau_con: f64,
    pub theta: f64,
    pub min_regions: usize,
    pub min_rel_freq: f64,
    /// Optional cap on neighbors kept per expansion query.
    pub max_neighbors: Option<usize>,
    /// Optional embedding-rank floor (drop words ranked beyond this).
    pub max_embedding_rank: Option<u32>,
    pub unresolved: UnresolvedPolicy,
    pub normalization: Normalization,
}

impl Default for LexiconConfig {
    fn default() -> Self {
        Self {
            tau_syn: 0.75,
            tau_con: 0.45,
            theta: 0.15,
            min_regions: 10,
            min_rel_freq: 1e-7,
            max_neighbors: None,
            max_embedding_rank: None,
            unresolved: UnresolvedPolicy::Error,
            normalization: Normalization::Relative,
        }
    }
}

impl LexiconConfig {
    pub fn validate(&self) -> Result<(), LexiconError> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.tau_syn) {
            return Err(LexiconError::InvalidConfig(alloc::format!("tau_syn {} not in (0,1)", self.tau_syn)));
        }
        if !unit(self.tau_con) {
            return Err(LexiconError::InvalidConfig(alloc::format!("tau_con {} not in (0,1)", self.tau_con)));
        }
        if !(self.theta >= 0.0) {
            return Err(LexiconError::InvalidConfig(alloc::format!("theta {} is negative", self.theta)));
        }
        if !(self.min_rel_freq >= 0.0) {
            return Err(LexiconError::InvalidConfig("min_rel_freq is negative".to_string()));
        }
        Ok(())
    }

    /// Degenerate thresholds that reduce the pipeline to the seed words.
    pub fn seeds_only(&self) -> Self {
        Self {
            tau_syn: 0.999,
            tau_con: 0.999,
            min_regions: 0,
            min_rel_freq: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Expansion {
    pub entries: Vec<LexiconEntry>,
    /// Seeds skipped under [`UnresolvedPolicy::Skip`].
    pub skipped: Vec<(String, EmbeddingError)>,
}

fn expansion_word(token: &str) -> String {
    token.replace('_', " ").to_lowercase()
}

fn neighbors_to_entries(
    table: &EmbeddingTable,
    query: &[f64],
    threshold: f64,
    exclude: &BTreeSet<String>,
    max_neighbors: Option<usize>,
    origin: Origin,
    source: &str,
    seeds: &BTreeSet<String>,
) -> Result<Vec<LexiconEntry>, EmbeddingError> {
    let mut hits = table.neighbors_at_least(query, threshold, exclude)?;
    if let Some(k) = max_neighbors {
        hits.truncate(k);
    }
    Ok(hits
        .into_iter()
        .map(|(tok, sim)| LexiconEntry {
            word: expansion_word(&tok),
            weight: sim.value().min(WEIGHT_CAP),
            origin,
            source: source.to_string(),
        })
        .filter(|e| !seeds.contains(&e.word))
        .collect())
}

fn resolve(
    table: &EmbeddingTable,
    seed: &str,
    policy: UnresolvedPolicy,
    skipped: &mut Vec<(String, EmbeddingError)>,
) -> Result<Option<Vec<f64>>, LexiconError> {
    match table.phrase_vector(seed) {
        Ok((v, _)) => Ok(Some(v)),
        Err(e) if policy == UnresolvedPolicy::Skip => {
            skipped.push((seed.to_string(), e));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

/// Neighbors of each seed with cosine >= `tau_syn`, sourced to that seed.
pub fn synonym_expand(
    table: &EmbeddingTable,
    seeds: &SeedSet,
    tau_syn: f64,
    config: &LexiconConfig,
) -> Result<Expansion, LexiconError> {
    let exclude = seeds.exclusions();
    let seed_words: BTreeSet<String> = seeds.entries.iter().cloned().collect();
    let mut out = Expansion::default();
    for seed in &seeds.entries {
        let Some(v) = resolve(table, seed, config.unresolved, &mut out.skipped)? else {
            continue;
        };
        if v.iter().all(|x| *x == 0.0) {
            out.skipped.push((seed.clone(), EmbeddingError::ZeroNorm));
            continue;
        }
        out.entries.extend(neighbors_to_entries(
            table,
            &v,
            tau_syn,
            &exclude,
            config.max_neighbors,
            Origin::Synonym,
            seed,
            &seed_words,
        )?);
    }
    Ok(out)
}

/// Neighbors of the centroid of all resolvable seeds with cosine >= `tau_con`.
pub fn concept_expand(
    table: &EmbeddingTable,
    seeds: &SeedSet,
    tau_con: f64,
    config: &LexiconConfig,
) -> Result<Expansion, LexiconError> {
    let exclude = seeds.exclusions();
    let seed_words: BTreeSet<String> = seeds.entries.iter().cloned().collect();
    let mut out = Expansion::default();
    let mut resolved = Vec::new();
    for seed in &seeds.entries {
        if let Some(_v) = resolve(table, seed, config.unresolved, &mut out.skipped)? {
            resolved.push(seed.as_str());
        }
    }
    if resolved.is_empty() {
        return Err(LexiconError::NoResolvableSeeds(seeds.construct.clone()));
    }
    let centroid = table.centroid(&resolved)?;
    if centroid.iter().all(|x| *x == 0.0) {
        return Ok(out);
    }
    out.entries = neighbors_to_entries(
        table,
        &centroid,
        tau_con,
        &exclude,
        config.max_neighbors,
        Origin::Concept,
        CENTROID,
        &seed_words,
    )?;
    Ok(out)
}

/// Union of seeds and both expansions.
///
/// A word found more than once keeps its highest weight; equal weights go to
/// seed, then synonym, then concept origin. Seeds always win at weight 1.
pub fn merge_entries(seeds: &SeedSet, synonyms: &[LexiconEntry], concepts: &[LexiconEntry]) -> Lexicon {
    let all = seeds
        .entries
        .iter()
        .map(|s| LexiconEntry::seed(s))
        .chain(synonyms.iter().cloned())
        .chain(concepts.iter().cloned());
    Lexicon::from_entries(&seeds.construct, all)
}

#[derive(Debug, Clone, PartialEq)]
pub enum RemovalReason {
    ZeroOccurrence,
    TooFewRegions { regions: usize },
    Rare { rel_freq: f64 },
    ZeroVariance,
    EmbeddingRank { rank: u32 },
    /// Failed the internal-correlation threshold; `None` when the correlation was undefined.
    LowCorrelation { r: Option<f64> },
}

impl fmt::Display for RemovalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RemovalReason::ZeroOccurrence => f.write_str("zero-occurrence"),
            RemovalReason::TooFewRegions { regions } => write!(f, "too-few-regions({regions})"),
            RemovalReason::Rare { rel_freq } => write!(f, "rare({rel_freq:e})"),
            RemovalReason::ZeroVariance => f.write_str("zero-variance"),
            RemovalReason::EmbeddingRank { rank } => write!(f, "embedding-rank({rank})"),
            RemovalReason::LowCorrelation { r: Some(r) } => write!(f, "low-correlation({r:.6})"),
            RemovalReason::LowCorrelation { r: None } => f.write_str("low-correlation(undefined)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Removal {
    pub word: String,
    pub reason: RemovalReason,
}

/// Drops entries ranked beyond `max_rank` in the embedding file; words absent from it stay.
pub fn rank_prune(lex: &Lexicon, table: &EmbeddingTable, max_rank: u32) -> (Lexicon, Vec<Removal>) {
    let mut out = lex.clone();
    let mut removed = Vec::new();
    for e in lex.entries() {
        let token = e.word.replace(' ', "_");
        if let Some(rank) = table.frequency_rank(&token) {
            if rank > max_rank {
                out.remove(&e.word);
                removed.push(Removal {
                    word: e.word.clone(),
                    reason: RemovalReason::EmbeddingRank { rank },
                });
            }
        }
    }
    (out, removed)
}

/// Removes words that are absent, too rare, or constant across regions.
pub fn frequency_prune(
    lex: &Lexicon,
    counts: &RegionCounts,
    min_regions: usize,
    min_rel_freq: f64,
    mode: Normalization,
) -> (Lexicon, Vec<Removal>) {
    let grand_total: f64 = counts.regions().map(|(_, t)| t.total).sum();
    let mut out = lex.clone();
    let mut removed = Vec::new();
    for e in lex.entries() {
        let mut present = 0usize;
        let mut sum = 0.0;
        let mut vals = Vec::with_capacity(counts.len());
        for (_, t) in counts.regions() {
            let c = t.get(&e.word);
            if c > 0.0 {
                present += 1;
            }
            sum += c;
            vals.push(match mode {
                Normalization::Relative => t.relative(&e.word),
                Normalization::Raw => c,
            });
        }
        let rel = if grand_total > 0.0 { sum / grand_total } else { 0.0 };
        let reason = if present == 0 {
            Some(RemovalReason::ZeroOccurrence)
        } else if present < min_regions {
            Some(RemovalReason::TooFewRegions { regions: present })
        } else if rel < min_rel_freq {
            Some(RemovalReason::Rare { rel_freq: rel })
        } else if vals.windows(2).all(|w| w[0] == w[1]) {
            Some(RemovalReason::ZeroVariance)
        } else {
            None
        };
        if let Some(reason) = reason {
            out.remove(&e.word);
            removed.push(Removal {
                word: e.word.clone(),
                reason,
            });
        }
    }
    (out, removed)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PurifyReport {
    /// Removed words in removal order with their statistic at removal time.
    pub removals: Vec<(String, Option<f64>)>,
    /// Final statistic of every surviving word.
    pub final_stats: Vec<(String, Option<f64>)>,
    /// Stopped because only two words were left, not because all passed.
    pub stopped_at_floor: bool,
}

/// Internal correlation of each column with the sum of the other columns.
pub fn internal_correlations(columns: &[Vec<f64>]) -> Vec<Option<f64>> {
    let n = columns.first().map_or(0, Vec::len);
    let mut total = alloc::vec![0.0; n];
    for c in columns {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    let mut rest = alloc::vec![0.0; n];
    columns
        .iter()
        .map(|c| {
            for ((r, t), v) in rest.iter_mut().zip(&total).zip(c) {
                *r = t - v;
            }
            correlation(c, &rest)
        })
        .collect()
}

fn stat_key(r: Option<f64>) -> f64 {
    r.unwrap_or(f64::NEG_INFINITY)
}

/// Greedy one-at-a-time removal until every word's internal correlation is at least `theta`.
///
/// Each round removes the single worst word (ties: lower weight, then word
/// order) and recomputes, stopping when all pass or two words remain. An
/// undefined correlation counts as failing.
pub fn purify(
    lex: &Lexicon,
    counts: &RegionCounts,
    theta: f64,
    mode: Normalization,
) -> Result<(Lexicon, PurifyReport), LexiconError> {
    let matrix = RegionFrequencyMatrix::from_weights(&lex.weights(), counts, mode);
    purify_matrix(lex, &matrix, theta)
}

/// [`purify`] over a precomputed frequency matrix whose columns follow `lex` word order.
pub fn purify_matrix(
    lex: &Lexicon,
    matrix: &RegionFrequencyMatrix,
    theta: f64,
) -> Result<(Lexicon, PurifyReport), LexiconError> {
    if matrix.n_regions() < 3 {
        return Err(LexiconError::TooFewRegions(matrix.n_regions()));
    }
    let words: Vec<String> = matrix.words().to_vec();
    let mut columns: Vec<Vec<f64>> = (0..words.len()).map(|j| matrix.column(j)).collect();
    let weights: Vec<f64> = words.iter().map(|w| lex.get(w).map_or(1.0, |e| e.weight)).collect();
    let mut active: Vec<usize> = (0..words.len()).collect();
    let mut out = lex.clone();
    let mut report = PurifyReport::default();
    let mut stats;
    loop {
        let cols: Vec<Vec<f64>> = active.iter().map(|&i| core::mem::take(&mut columns[i])).collect();
        stats = internal_correlations(&cols);
        for (&i, c) in active.iter().zip(cols) {
            columns[i] = c;
        }
        if active.len() <= 2 {
            report.stopped_at_floor = stats.iter().any(|r| !(stat_key(*r) >= theta));
            break;
        }
        let worst = (0..active.len())
            .min_by(|&a, &b| {
                let (ia, ib) = (active[a], active[b]);
                stat_key(stats[a])
                    .partial_cmp(&stat_key(stats[b]))
                    .unwrap_or(Ordering::Equal)
                    .then(weights[ia].partial_cmp(&weights[ib]).unwrap_or(Ordering::Equal))
                    .then(words[ia].cmp(&words[ib]))
            })
            .expect("nonempty");
        if stat_key(stats[worst]) >= theta {
            break;
        }
        let idx = active.remove(worst);
        out.remove(&words[idx]);
        report.removals.push((words[idx].clone(), stats[worst]));
    }
    report.final_stats = active.iter().zip(&stats).map(|(&i, r)| (words[i].clone(), *r)).collect();
    Ok((out, report))
}

/// Stage sizes and removals of one lexicon build.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BuildReport {
    pub construct: String,
    pub n_seeds: usize,
    pub n_synonym: usize,
    pub n_concept: usize,
    pub n_merged: usize,
    pub n_after_frequency: usize,
    pub n_after_purification: usize,
    pub skipped_seeds: Vec<(String, String)>,
    pub removals: Vec<Removal>,
    pub stopped_at_floor: bool,
    pub final_stats: Vec<(String, Option<f64>)>,
}

/// Seeds plus both expansions, before any corpus-based pruning.
pub fn expand(
    config: &LexiconConfig,
    table: &EmbeddingTable,
    seeds: &SeedSet,
) -> Result<(Lexicon, BuildReport), LexiconError> {
    config.validate()?;
    let syn = synonym_expand(table, seeds, config.tau_syn, config)?;
    let con = concept_expand(table, seeds, config.tau_con, config)?;
    let mut lex = merge_entries(seeds, &syn.entries, &con.entries);
    lex.provenance.tau_syn = Some(config.tau_syn);
    lex.provenance.tau_con = Some(config.tau_con);
    let mut skipped: Vec<(String, String)> = Vec::new();
    for (s, e) in syn.skipped.iter().chain(&con.skipped) {
        if !skipped.iter().any(|(k, _)| k == s) {
            skipped.push((s.clone(), e.to_string()));
        }
    }
    let mut report = BuildReport {
        construct: seeds.construct.clone(),
        n_seeds: seeds.entries.len(),
        n_synonym: syn.entries.len(),
        n_concept: con.entries.len(),
        n_merged: lex.len(),
        skipped_seeds: skipped,
        ..BuildReport::default()
    };
    if let Some(max_rank) = config.max_embedding_rank {
        let (pruned, removed) = rank_prune(&lex, table, max_rank);
        lex = pruned;
        report.removals.extend(removed);
    }
    Ok((lex, report))
}

/// Frequency pruning followed by correlation purification.
pub fn prune(
    config: &LexiconConfig,
    lex: &Lexicon,
    counts: &RegionCounts,
    report: &mut BuildReport,
) -> Result<Lexicon, LexiconError> {
    if counts.len() < 3 {
        return Err(LexiconError::TooFewRegions(counts.len()));
    }
    let (lex, removed) = frequency_prune(lex, counts, config.min_regions, config.min_rel_freq, config.normalization);
    report.n_after_frequency = lex.len();
    report.removals.extend(removed);
    let (mut lex, pur) = purify(&lex, counts, config.theta, config.normalization)?;
    lex.provenance.theta = Some(config.theta);
    report.n_after_purification = lex.len();
    report.stopped_at_floor = pur.stopped_at_floor;
    report.final_stats = pur.final_stats;
    report.removals.extend(pur.removals.into_iter().map(|(word, r)| Removal {
        word,
        reason: RemovalReason::LowCorrelation { r },
    }));
    Ok(lex)
}

/// Full pipeline: expansion, merge, frequency pruning, purification.
///
/// `counts` must already include phrase counts for any multi-word entries.
pub fn build_lexicon(
    config: &LexiconConfig,
    table: &EmbeddingTable,
    seeds: &SeedSet,
    counts: &RegionCounts,
) -> Result<(Lexicon, BuildReport), LexiconError> {
    let (lex, mut report) = expand(config, table, seeds)?;
    let lex = prune(config, &lex, counts, &mut report)?;
    Ok((lex, report))
}

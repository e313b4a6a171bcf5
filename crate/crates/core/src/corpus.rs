//! Tokenization and per-region term counting.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error("invalid region id {0:?} (expected 5-digit county FIPS or 2-letter state code)")]
    InvalidRegion(String),
    #[error("line {line}: negative count for ({region}, {word})")]
    NegativeCount { line: usize, region: String, word: String },
    #[error("line {line}: relative frequency {value} for ({region}, {word}) outside [0, 1]")]
    FrequencyOutOfRange {
        line: usize,
        region: String,
        word: String,
        value: f64,
    },
    #[error("line {line}: duplicate pair ({region}, {word}), first on line {first_line}")]
    DuplicatePair {
        line: usize,
        first_line: usize,
        region: String,
        word: String,
    },
    #[error("cannot merge counts in {0:?} mode")]
    MergeMode(CountMode),
    #[error("phrase {0:?} must contain at least two words")]
    ShortPhrase(String),
}

/// County FIPS code (5 digits) or state code (2 uppercase letters).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegionId(String);

impl RegionId {
    pub fn parse(code: &str) -> Result<Self, CorpusError> {
        let ok = match code.len() {
            5 => code.bytes().all(|b| b.is_ascii_digit()),
            2 => code.bytes().all(|b| b.is_ascii_uppercase()),
            _ => false,
        };
        if ok {
            Ok(Self(code.to_string()))
        } else {
            Err(CorpusError::InvalidRegion(code.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_county(&self) -> bool {
        self.0.len() == 5
    }

    /// First two digits of a county FIPS code.
    pub fn state_fips(&self) -> Option<&str> {
        self.is_county().then(|| &self.0[..2])
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl core::str::FromStr for RegionId {
    type Err = CorpusError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub region: RegionId,
    pub text: String,
}

impl Document {
    pub fn new(region: RegionId, text: impl Into<String>) -> Self {
        Self {
            region,
            text: text.into(),
        }
    }
}

fn is_url(p: &str) -> bool {
    p.starts_with("http://") || p.starts_with("https://")
}

/// Lowercases, splits on whitespace and trims punctuation from each piece.
///
/// URLs and `@mentions` are dropped, hashtags lose their `#`, and internal
/// apostrophes survive (`don't`).
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    tokenize_into(text, &mut out);
    out
}

/// [`tokenize`] appending into an existing buffer.
pub fn tokenize_into(text: &str, out: &mut Vec<String>) {
    for piece in text.split_whitespace() {
        let lower = piece.to_lowercase();
        if lower.starts_with('@') || is_url(&lower) {
            continue;
        }
        let core = lower.trim_matches(|c: char| !c.is_alphanumeric());
        if core.is_empty() || is_url(core) {
            continue;
        }
        if core.len() == lower.len() {
            out.push(lower);
        } else {
            out.push(core.to_string());
        }
    }
}

/// Multi-word entries counted with a sliding window over document tokens.
#[derive(Debug, Clone, Default)]
pub struct PhraseSet {
    phrases: Vec<(String, Vec<String>)>,
    by_first: BTreeMap<String, Vec<usize>>,
}

impl PhraseSet {
    pub fn new<S: AsRef<str>>(entries: impl IntoIterator<Item = S>) -> Result<Self, CorpusError> {
        let mut set = Self::default();
        for e in entries {
            set.insert(e.as_ref())?;
        }
        Ok(set)
    }

    /// Adds a phrase; its key is the normalized token sequence joined by single spaces.
    pub fn insert(&mut self, entry: &str) -> Result<(), CorpusError> {
        let toks = tokenize(entry);
        if toks.len() < 2 {
            return Err(CorpusError::ShortPhrase(entry.to_string()));
        }
        let key = toks.join(" ");
        if self.phrases.iter().any(|(k, _)| *k == key) {
            return Ok(());
        }
        let idx = self.phrases.len();
        self.by_first.entry(toks[0].clone()).or_default().push(idx);
        self.phrases.push((key, toks));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.phrases.iter().map(|(k, _)| k.as_str())
    }

    fn for_each_match(&self, tokens: &[String], mut f: impl FnMut(&str)) {
        if self.phrases.is_empty() {
            return;
        }
        for i in 0..tokens.len() {
            if let Some(cands) = self.by_first.get(&tokens[i]) {
                for &p in cands {
                    let (key, words) = &self.phrases[p];
                    if tokens.len() - i >= words.len() && tokens[i..i + words.len()] == words[..] {
                        f(key);
                    }
                }
            }
        }
    }
}

/// Whether region values are absolute counts or precomputed relative frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountMode {
    Counts,
    Frequencies,
}

/// Terms observed in one region.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegionTally {
    pub terms: BTreeMap<String, f64>,
    /// Unigram token total (phrases excluded). 1.0 in frequency mode.
    pub total: f64,
    /// Unknown when loaded from a precomputed table.
    pub documents: Option<u64>,
}

impl RegionTally {
    pub fn get(&self, term: &str) -> f64 {
        self.terms.get(term).copied().unwrap_or(0.0)
    }

    /// Count divided by the region's unigram total.
    pub fn relative(&self, term: &str) -> f64 {
        if self.total > 0.0 {
            self.get(term) / self.total
        } else {
            0.0
        }
    }

    fn add(&mut self, term: &str, by: f64) {
        if let Some(v) = self.terms.get_mut(term) {
            *v += by;
        } else {
            self.terms.insert(term.to_string(), by);
        }
    }
}

/// Region → term table, with totals and document counts.
///
/// Merging two count-mode tables is exact (integer sums in `f64`), so the
/// result is independent of document order and sharding.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionCounts {
    mode: CountMode,
    regions: BTreeMap<RegionId, RegionTally>,
}

impl RegionCounts {
    pub fn new(mode: CountMode) -> Self {
        Self {
            mode,
            regions: BTreeMap::new(),
        }
    }

    pub fn mode(&self) -> CountMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn regions(&self) -> impl Iterator<Item = (&RegionId, &RegionTally)> {
        self.regions.iter()
    }

    pub fn region_ids(&self) -> impl Iterator<Item = &RegionId> {
        self.regions.keys()
    }

    pub fn get(&self, region: &RegionId) -> Option<&RegionTally> {
        self.regions.get(region)
    }

    /// Counts one document: unigrams plus every phrase occurrence (overlaps allowed).
    pub fn add_document(&mut self, doc: &Document, phrases: &PhraseSet) {
        let mut buf = Vec::new();
        self.add_document_with(doc, phrases, &mut buf);
    }

    /// As [`add_document`](Self::add_document) but reusing a token buffer.
    pub fn add_document_with(&mut self, doc: &Document, phrases: &PhraseSet, buf: &mut Vec<String>) {
        self.add_text_with(&doc.region, &doc.text, phrases, buf);
    }

    /// Counts one document given as a region and borrowed text.
    pub fn add_text_with(&mut self, region: &RegionId, text: &str, phrases: &PhraseSet, buf: &mut Vec<String>) {
        buf.clear();
        tokenize_into(text, buf);
        if !self.regions.contains_key(region) {
            self.regions.insert(
                region.clone(),
                RegionTally {
                    documents: Some(0),
                    ..RegionTally::default()
                },
            );
        }
        let tally = self.regions.get_mut(region).expect("inserted above");
        tally.documents = Some(tally.documents.unwrap_or(0) + 1);
        tally.total += buf.len() as f64;
        phrases.for_each_match(buf, |key| tally.add(key, 1.0));
        for tok in buf.drain(..) {
            match tally.terms.get_mut(&tok) {
                Some(v) => *v += 1.0,
                None => {
                    tally.terms.insert(tok, 1.0);
                }
            }
        }
    }

    /// Adds `other` into `self`. Only count-mode tables merge.
    pub fn merge(&mut self, other: RegionCounts) -> Result<(), CorpusError> {
        if self.mode != CountMode::Counts || other.mode != CountMode::Counts {
            return Err(CorpusError::MergeMode(CountMode::Frequencies));
        }
        for (region, theirs) in other.regions {
            match self.regions.get_mut(&region) {
                None => {
                    self.regions.insert(region, theirs);
                }
                Some(mine) => {
                    mine.total += theirs.total;
                    mine.documents = match (mine.documents, theirs.documents) {
                        (Some(a), Some(b)) => Some(a + b),
                        (a, b) => a.or(b),
                    };
                    for (term, v) in theirs.terms {
                        match mine.terms.get_mut(&term) {
                            Some(x) => *x += v,
                            None => {
                                mine.terms.insert(term, v);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Builds a table from precomputed `(region, word, value, line)` records.
    ///
    /// Count mode sums values into the region total; frequency mode fixes every
    /// total at 1.0 so relative frequencies pass through unchanged.
    pub fn from_records<I>(mode: CountMode, records: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = (RegionId, String, f64, usize)>,
    {
        let mut out = Self::new(mode);
        let mut first_line: BTreeMap<(RegionId, String), usize> = BTreeMap::new();
        for (region, word, value, line) in records {
            match mode {
                CountMode::Counts if value < 0.0 || !value.is_finite() => {
                    return Err(CorpusError::NegativeCount {
                        line,
                        region: region.to_string(),
                        word,
                    })
                }
                CountMode::Frequencies if !(0.0..=1.0).contains(&value) => {
                    return Err(CorpusError::FrequencyOutOfRange {
                        line,
                        region: region.to_string(),
                        word,
                        value,
                    })
                }
                _ => {}
            }
            let key = (region.clone(), word.clone());
            if let Some(&first) = first_line.get(&key) {
                return Err(CorpusError::DuplicatePair {
                    line,
                    first_line: first,
                    region: region.to_string(),
                    word,
                });
            }
            first_line.insert(key, line);
            let tally = out.regions.entry(region).or_default();
            match mode {
                CountMode::Counts => tally.total += value,
                CountMode::Frequencies => tally.total = 1.0,
            }
            tally.terms.insert(word, value);
        }
        Ok(out)
    }

    /// Drops regions whose known document count is below `floor`; returns the dropped ids.
    ///
    /// Regions with unknown document counts are kept.
    pub fn retain_min_documents(&mut self, floor: u64) -> Vec<RegionId> {
        let dropped: Vec<RegionId> = self
            .regions
            .iter()
            .filter(|(_, t)| matches!(t.documents, Some(d) if d < floor))
            .map(|(r, _)| r.clone())
            .collect();
        for r in &dropped {
            self.regions.remove(r);
        }
        dropped
    }
}

/// Single-pass count over a document stream.
pub fn aggregate_counts<'a, I>(documents: I, phrases: &PhraseSet) -> RegionCounts
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut counts = RegionCounts::new(CountMode::Counts);
    let mut buf = Vec::new();
    for doc in documents {
        counts.add_document_with(doc, phrases, &mut buf);
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rid(s: &str) -> RegionId {
        RegionId::parse(s).unwrap()
    }

    #[test]
    fn region_ids() {
        assert!(RegionId::parse("01001").is_ok());
        assert!(RegionId::parse("CA").is_ok());
        for bad in ["", "1001", "ca", "0100A", "CAL", "010011"] {
            assert!(RegionId::parse(bad).is_err(), "{bad}");
        }
        assert_eq!(rid("01001").state_fips(), Some("01"));
        assert_eq!(rid("CA").state_fips(), None);
    }

    #[test]
    fn tokenizer_examples() {
        assert_eq!(tokenize("Honor thy duties!"), ["honor", "thy", "duties"]);
        assert_eq!(
            tokenize("Stay cool out there, friends! #LouisianaLife"),
            ["stay", "cool", "out", "there", "friends", "louisianalife"]
        );
        assert_eq!(tokenize("@user check https://x.co"), ["check"]);
        assert_eq!(tokenize("Don't   stop... (believing)"), ["don't", "stop", "believing"]);
        assert_eq!(tokenize("(https://x.co) ok"), ["ok"]);
        assert!(tokenize(" \t ... !!").is_empty());
    }

    #[test]
    fn phrase_counting() {
        let phrases = PhraseSet::new(["fit in"]).unwrap();
        let docs = vec![Document::new(rid("01001"), "we fit in here")];
        let c = aggregate_counts(&docs, &phrases);
        let t = c.get(&rid("01001")).unwrap();
        assert_eq!(t.total, 4.0);
        assert_eq!(t.documents, Some(1));
        for w in ["we", "fit", "in", "here", "fit in"] {
            assert_eq!(t.get(w), 1.0, "{w}");
        }
        assert!(PhraseSet::new(["solo"]).is_err());
    }

    #[test]
    fn overlapping_phrases() {
        let phrases = PhraseSet::new(["la la"]).unwrap();
        let docs = vec![Document::new(rid("01001"), "la la la")];
        let c = aggregate_counts(&docs, &phrases);
        assert_eq!(c.get(&rid("01001")).unwrap().get("la la"), 2.0);
    }

    #[test]
    fn document_counts_per_region() {
        let docs = vec![
            Document::new(rid("01001"), "a b"),
            Document::new(rid("01003"), "c"),
            Document::new(rid("01001"), "d"),
        ];
        let c = aggregate_counts(&docs, &PhraseSet::default());
        assert_eq!(c.get(&rid("01001")).unwrap().documents, Some(2));
        assert_eq!(c.get(&rid("01003")).unwrap().documents, Some(1));
    }

    #[test]
    fn shard_merge_matches_single_pass() {
        let docs = vec![
            Document::new(rid("01001"), "we fit in here"),
            Document::new(rid("01003"), "fit in or fit out"),
            Document::new(rid("01001"), "here we go"),
        ];
        let phrases = PhraseSet::new(["fit in"]).unwrap();
        let whole = aggregate_counts(&docs, &phrases);
        let mut a = aggregate_counts(&docs[..1], &phrases);
        a.merge(aggregate_counts(&docs[1..], &phrases)).unwrap();
        assert_eq!(a, whole);
    }

    #[test]
    fn records_count_mode() {
        let c = RegionCounts::from_records(
            CountMode::Counts,
            vec![(rid("01001"), "honor".into(), 3.0, 2), (rid("01001"), "duty".into(), 1.0, 3)],
        )
        .unwrap();
        let t = c.get(&rid("01001")).unwrap();
        assert_eq!(t.total, 4.0);
        assert_eq!(t.documents, None);
        assert_eq!(t.relative("honor"), 0.75);
    }

    #[test]
    fn records_errors() {
        let dup = RegionCounts::from_records(
            CountMode::Counts,
            vec![(rid("01001"), "honor".into(), 3.0, 2), (rid("01001"), "honor".into(), 1.0, 3)],
        );
        assert_eq!(
            dup,
            Err(CorpusError::DuplicatePair {
                line: 3,
                first_line: 2,
                region: "01001".into(),
                word: "honor".into()
            })
        );
        assert!(RegionCounts::from_records(CountMode::Counts, vec![(rid("01001"), "x".into(), -1.0, 2)]).is_err());
        assert!(RegionCounts::from_records(CountMode::Frequencies, vec![(rid("01001"), "x".into(), 1.5, 2)]).is_err());
    }

    #[test]
    fn frequency_mode_totals() {
        let c = RegionCounts::from_records(
            CountMode::Frequencies,
            vec![(rid("01001"), "a".into(), 0.5, 2), (rid("01001"), "b".into(), 0.4, 3)],
        )
        .unwrap();
        let t = c.get(&rid("01001")).unwrap();
        assert_eq!(t.total, 1.0);
        assert_eq!(t.relative("a"), 0.5);
        let mut c2 = c.clone();
        assert!(c2.merge(c).is_err());
    }

    #[test]
    fn document_floor() {
        let docs: Vec<Document> = (0..5)
            .map(|i| Document::new(rid(if i < 3 { "01001" } else { "01003" }), "x"))
            .collect();
        let mut c = aggregate_counts(&docs, &PhraseSet::default());
        let dropped = c.retain_min_documents(3);
        assert_eq!(dropped, vec![rid("01003")]);
        assert_eq!(c.len(), 1);
    }
}

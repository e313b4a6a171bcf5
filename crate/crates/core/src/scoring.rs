//! Weighted frequencies, region scores, aggregation and normalization.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::{RegionCounts, RegionId};
use crate::lexicon::Lexicon;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoringError {
    #[error("county {0} has no state mapping")]
    UnmappedCounty(String),
    #[error("scores for {0:?} span a degenerate range (all identical)")]
    DegenerateRange(String),
    #[error("region sets differ: {0} present in only one table")]
    RegionMismatch(String),
    #[error("unknown community label {0:?}")]
    UnknownCommunity(String),
}

/// Whether weighted frequencies use per-region relative frequencies or raw counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// `weight * count / region_total`.
    #[default]
    Relative,
    /// `weight * count`, volume-sensitive.
    Raw,
}

/// Regions × words table of weighted frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionFrequencyMatrix {
    regions: Vec<RegionId>,
    documents: Vec<Option<u64>>,
    words: Vec<String>,
    values: Vec<f64>,
    mode: Normalization,
}

impl RegionFrequencyMatrix {
    /// Builds the matrix for explicit `(word, weight)` columns.
    pub fn from_weights<S: AsRef<str>>(
        columns: &[(S, f64)],
        counts: &RegionCounts,
        mode: Normalization,
    ) -> Self {
        let mut regions = Vec::with_capacity(counts.len());
        let mut documents = Vec::with_capacity(counts.len());
        let mut values = Vec::with_capacity(counts.len() * columns.len());
        for (region, tally) in counts.regions() {
            regions.push(region.clone());
            documents.push(tally.documents);
            for (word, weight) in columns {
                let f = match mode {
                    Normalization::Relative => tally.relative(word.as_ref()),
                    Normalization::Raw => tally.get(word.as_ref()),
                };
                values.push(weight * f);
            }
        }
        Self {
            regions,
            documents,
            words: columns.iter().map(|(w, _)| w.as_ref().to_string()).collect(),
            values,
            mode,
        }
    }

    /// Wraps a dense row-major matrix.
    pub fn from_dense(regions: Vec<RegionId>, words: Vec<String>, values: Vec<f64>, mode: Normalization) -> Self {
        assert_eq!(values.len(), regions.len() * words.len(), "matrix shape");
        let documents = alloc::vec![None; regions.len()];
        Self {
            regions,
            documents,
            words,
            values,
            mode,
        }
    }

    pub fn regions(&self) -> &[RegionId] {
        &self.regions
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn mode(&self) -> Normalization {
        self.mode
    }

    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    pub fn get(&self, region: usize, word: usize) -> f64 {
        self.values[region * self.words.len() + word]
    }

    pub fn row(&self, region: usize) -> &[f64] {
        let w = self.words.len();
        &self.values[region * w..(region + 1) * w]
    }

    pub fn column(&self, word: usize) -> Vec<f64> {
        (0..self.regions.len()).map(|r| self.get(r, word)).collect()
    }
}

/// F(w, i) for every lexicon word and region.
pub fn weighted_frequency_matrix(lex: &Lexicon, counts: &RegionCounts, mode: Normalization) -> RegionFrequencyMatrix {
    let cols: Vec<(&str, f64)> = lex.entries().map(|e| (e.word.as_str(), e.weight)).collect();
    RegionFrequencyMatrix::from_weights(&cols, counts, mode)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub region: RegionId,
    pub construct: String,
    pub score: f64,
    pub n_docs: Option<u64>,
    pub score_norm: Option<f64>,
}

/// Per-region construct scores.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn new(rows: Vec<ScoreRow>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Construct names in order of first appearance.
    pub fn constructs(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.iter().any(|c| *c == r.construct) {
                out.push(r.construct.clone());
            }
        }
        out
    }

    /// Rows of one construct.
    pub fn construct(&self, name: &str) -> ScoreTable {
        ScoreTable::new(self.rows.iter().filter(|r| r.construct == name).cloned().collect())
    }

    /// `region → score` for one construct.
    pub fn score_map(&self, construct: &str) -> BTreeMap<RegionId, f64> {
        self.rows
            .iter()
            .filter(|r| r.construct == construct)
            .map(|r| (r.region.clone(), r.score))
            .collect()
    }

    pub fn extend(&mut self, other: ScoreTable) {
        self.rows.extend(other.rows);
    }
}

/// Sum of each region's weighted frequencies.
pub fn region_scores(matrix: &RegionFrequencyMatrix, construct: &str) -> ScoreTable {
    let rows = (0..matrix.n_regions())
        .map(|i| ScoreRow {
            region: matrix.regions[i].clone(),
            construct: construct.to_string(),
            score: matrix.row(i).iter().sum(),
            n_docs: matrix.documents[i],
            score_norm: None,
        })
        .collect();
    ScoreTable::new(rows)
}

/// Unweighted mean of county scores per state; every county counts once.
pub fn aggregate_to_state(
    scores: &ScoreTable,
    county_to_state: &BTreeMap<RegionId, RegionId>,
) -> Result<ScoreTable, ScoringError> {
    let mut out = Vec::new();
    for construct in scores.constructs() {
        let mut acc: BTreeMap<RegionId, (f64, usize, Option<u64>)> = BTreeMap::new();
        for row in scores.rows.iter().filter(|r| r.construct == construct) {
            let state = county_to_state
                .get(&row.region)
                .ok_or_else(|| ScoringError::UnmappedCounty(row.region.to_string()))?;
            let e = acc.entry(state.clone()).or_insert((0.0, 0, Some(0)));
            e.0 += row.score;
            e.1 += 1;
            e.2 = match (e.2, row.n_docs) {
                (Some(a), Some(b)) => Some(a + b),
                _ => None,
            };
        }
        for (state, (sum, k, docs)) in acc {
            out.push(ScoreRow {
                region: state,
                construct: construct.clone(),
                score: sum / k as f64,
                n_docs: docs,
                score_norm: None,
            });
        }
    }
    Ok(ScoreTable::new(out))
}

/// Min–max normalization per construct; fills `score_norm`.
pub fn normalize01(scores: &ScoreTable) -> Result<ScoreTable, ScoringError> {
    let mut out = scores.clone();
    for construct in scores.constructs() {
        let (lo, hi) = scores
            .rows
            .iter()
            .filter(|r| r.construct == construct)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.score), hi.max(r.score)));
        if !(hi > lo) {
            return Err(ScoringError::DegenerateRange(construct));
        }
        for r in out.rows.iter_mut().filter(|r| r.construct == construct) {
            r.score_norm = Some((r.score - lo) / (hi - lo));
        }
    }
    Ok(out)
}

/// Z-score normalization per construct (population standard deviation); fills `score_norm`.
pub fn normalize_z(scores: &ScoreTable) -> Result<ScoreTable, ScoringError> {
    let mut out = scores.clone();
    for construct in scores.constructs() {
        let vals: Vec<f64> = scores.rows.iter().filter(|r| r.construct == construct).map(|r| r.score).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let sd = libm::sqrt(vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n);
        if !(sd > 0.0) {
            return Err(ScoringError::DegenerateRange(construct));
        }
        for r in out.rows.iter_mut().filter(|r| r.construct == construct) {
            r.score_norm = Some((r.score - mean) / sd);
        }
    }
    Ok(out)
}

/// Per-region `individualism - collectivism`.
///
/// With `normalized`, both inputs are min–max normalized first (existing
/// `score_norm` values are reused when present).
pub fn diff_score(
    individualism: &ScoreTable,
    collectivism: &ScoreTable,
    normalized: bool,
) -> Result<ScoreTable, ScoringError> {
    let pick = |t: &ScoreTable| -> Result<BTreeMap<RegionId, (f64, Option<u64>)>, ScoringError> {
        let t = if normalized && t.rows.iter().any(|r| r.score_norm.is_none()) {
            normalize01(t)?
        } else {
            t.clone()
        };
        Ok(t.rows
            .into_iter()
            .map(|r| {
                let v = if normalized { r.score_norm.unwrap_or(r.score) } else { r.score };
                (r.region, (v, r.n_docs))
            })
            .collect())
    };
    let a = pick(individualism)?;
    let b = pick(collectivism)?;
    if let Some(r) = a.keys().find(|r| !b.contains_key(*r)).or_else(|| b.keys().find(|r| !a.contains_key(*r))) {
        return Err(ScoringError::RegionMismatch(r.to_string()));
    }
    Ok(ScoreTable::new(
        a.into_iter()
            .map(|(region, (x, docs))| ScoreRow {
                score: x - b[&region].0,
                region,
                construct: "diff".to_string(),
                n_docs: docs,
                score_norm: None,
            })
            .collect(),
    ))
}

/// American Communities Project county types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Community {
    AfricanAmericanSouth,
    AgingFarmlands,
    BigCities,
    CollegeTowns,
    EvangelicalHubs,
    Exurbs,
    GrayingAmerica,
    HispanicCenters,
    LdsEnclaves,
    MiddleSuburbs,
    MilitaryPosts,
    NativeAmericanLands,
    RuralMiddleAmerica,
    UrbanSuburbs,
    WorkingClassCountry,
}

impl Community {
    pub const ALL: [Community; 15] = [
        Community::AfricanAmericanSouth,
        Community::AgingFarmlands,
        Community::BigCities,
        Community::CollegeTowns,
        Community::EvangelicalHubs,
        Community::Exurbs,
        Community::GrayingAmerica,
        Community::HispanicCenters,
        Community::LdsEnclaves,
        Community::MiddleSuburbs,
        Community::MilitaryPosts,
        Community::NativeAmericanLands,
        Community::RuralMiddleAmerica,
        Community::UrbanSuburbs,
        Community::WorkingClassCountry,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Community::AfricanAmericanSouth => "African American South",
            Community::AgingFarmlands => "Aging Farmlands",
            Community::BigCities => "Big Cities",
            Community::CollegeTowns => "College Towns",
            Community::EvangelicalHubs => "Evangelical Hubs",
            Community::Exurbs => "Exurbs",
            Community::GrayingAmerica => "Graying America",
            Community::HispanicCenters => "Hispanic Centers",
            Community::LdsEnclaves => "LDS Enclaves",
            Community::MiddleSuburbs => "Middle Suburbs",
            Community::MilitaryPosts => "Military Posts",
            Community::NativeAmericanLands => "Native American Lands",
            Community::RuralMiddleAmerica => "Rural Middle America",
            Community::UrbanSuburbs => "Urban Suburbs",
            Community::WorkingClassCountry => "Working Class Country",
        }
    }

    /// Case-insensitive; accepts spaces, underscores or hyphens between words.
    pub fn parse(label: &str) -> Result<Self, ScoringError> {
        let norm = |s: &str| -> String {
            s.chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(|c| c.to_lowercase())
                .collect()
        };
        let want = norm(label);
        Community::ALL
            .into_iter()
            .find(|c| norm(c.label()) == want)
            .ok_or_else(|| ScoringError::UnknownCommunity(label.to_string()))
    }
}

impl fmt::Display for Community {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub type CommunityMap = BTreeMap<RegionId, Community>;

#[derive(Debug, Clone, PartialEq)]
pub struct CommunityRow {
    pub community: Community,
    pub mean_individualism: f64,
    pub mean_collectivism: f64,
    pub n_counties: usize,
}

/// Mean min–max-normalized scores per community.
///
/// Only counties with both scores and a community label count. Communities
/// with fewer than `min_counties` such counties are dropped, and the
/// normalization range is taken over the counties of the remaining
/// communities. Rows are sorted by descending individualism.
pub fn community_summary(
    individualism: &ScoreTable,
    collectivism: &ScoreTable,
    communities: &CommunityMap,
    min_counties: usize,
) -> Vec<CommunityRow> {
    let ind: BTreeMap<&RegionId, f64> = individualism.rows.iter().map(|r| (&r.region, r.score)).collect();
    let col: BTreeMap<&RegionId, f64> = collectivism.rows.iter().map(|r| (&r.region, r.score)).collect();
    let mut members: BTreeMap<Community, Vec<(f64, f64)>> = BTreeMap::new();
    for (region, &c) in communities {
        if let (Some(&i), Some(&k)) = (ind.get(region), col.get(region)) {
            members.entry(c).or_default().push((i, k));
        }
    }
    members.retain(|_, v| v.len() >= min_counties.max(1));
    let range = |sel: fn(&(f64, f64)) -> f64| {
        members
            .values()
            .flatten()
            .map(sel)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (ilo, ihi) = range(|p| p.0);
    let (clo, chi) = range(|p| p.1);
    let scale = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
    let mut rows: Vec<CommunityRow> = members
        .into_iter()
        .map(|(community, v)| {
            let n = v.len() as f64;
            CommunityRow {
                community,
                mean_individualism: v.iter().map(|p| scale(p.0, ilo, ihi)).sum::<f64>() / n,
                mean_collectivism: v.iter().map(|p| scale(p.1, clo, chi)).sum::<f64>() / n,
                n_counties: v.len(),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        b.mean_individualism
            .partial_cmp(&a.mean_individualism)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.community.cmp(&b.community))
    });
    rows
}

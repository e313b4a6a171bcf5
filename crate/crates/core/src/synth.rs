//! Planted-signal synthetic datasets.
//!
//! Each construct owns an orthonormal anchor direction. Its planted words and
//! confounders are the anchor plus a perturbation of norm 0.3 drawn in the
//! complement of all anchors, so within-cluster cosine is at least
//! `(1 - 0.09) / 1.09 > 0.83` and cross-cluster cosine at most `0.09 / 1.09`.
//! Filler words are random unit vectors in the complement.
//!
//! Every region gets a planted score in `[0, 1]` per construct, a smooth
//! function of its synthetic coordinates. Planted words are emitted at a rate
//! proportional to `1 + s (2t - 1)` and confounders at `1 - s (2t - 1)`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Document, RegionId};
use crate::embedding::cosine;
use crate::gp::FeatureRow;
use crate::stats::IndicatorTable;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("dimension {dim} cannot separate {constructs} clusters; use dim >= {need}")]
    Infeasible { dim: usize, constructs: usize, need: usize },
    #[error("generated geometry violates cluster bounds: {0}")]
    Geometry(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_regions: usize,
    pub n_constructs: usize,
    pub words_per_construct: usize,
    /// Total embedding vocabulary: planted + confounder + filler words.
    pub vocab_size: usize,
    pub dim: usize,
    pub signal_strength: f64,
    /// Share of tokens drawn from filler vocabulary at minimum; the topical
    /// share never exceeds `1 - noise_vocab_fraction`.
    pub noise_vocab_fraction: f64,
    /// Anti-correlated words planted in each construct's cluster.
    pub confounder_count: usize,
    pub seed: u64,
    pub docs_per_region: usize,
    pub tokens_per_doc: usize,
    pub indicators_per_construct: usize,
    /// Standard deviation of the noise added to state-level indicators.
    pub indicator_noise: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_regions: 30,
            n_constructs: 2,
            words_per_construct: 10,
            vocab_size: 500,
            dim: 50,
            signal_strength: 1.0,
            noise_vocab_fraction: 0.9,
            confounder_count: 3,
            seed: 7,
            docs_per_region: 200,
            tokens_per_doc: 15,
            indicators_per_construct: 3,
            indicator_noise: 0.1,
        }
    }
}

/// Number of seed words listed per construct.
pub const SEEDS_PER_CONSTRUCT: usize = 5;

const PERTURBATION: f64 = 0.3;

/// State FIPS codes and postal abbreviations (50 states + DC).
pub const STATES: [(&str, &str); 51] = [
    ("01", "AL"), ("02", "AK"), ("04", "AZ"), ("05", "AR"), ("06", "CA"), ("08", "CO"),
    ("09", "CT"), ("10", "DE"), ("11", "DC"), ("12", "FL"), ("13", "GA"), ("15", "HI"),
    ("16", "ID"), ("17", "IL"), ("18", "IN"), ("19", "IA"), ("20", "KS"), ("21", "KY"),
    ("22", "LA"), ("23", "ME"), ("24", "MD"), ("25", "MA"), ("26", "MI"), ("27", "MN"),
    ("28", "MS"), ("29", "MO"), ("30", "MT"), ("31", "NE"), ("32", "NV"), ("33", "NH"),
    ("34", "NJ"), ("35", "NM"), ("36", "NY"), ("37", "NC"), ("38", "ND"), ("39", "OH"),
    ("40", "OK"), ("41", "OR"), ("42", "PA"), ("44", "RI"), ("45", "SC"), ("46", "SD"),
    ("47", "TN"), ("48", "TX"), ("49", "UT"), ("50", "VT"), ("51", "VA"), ("53", "WA"),
    ("54", "WV"), ("55", "WI"), ("56", "WY"),
];

/// Everything needed to run the pipeline against a known answer.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub constructs: Vec<String>,
    /// Embedding rows in file order.
    pub embeddings: Vec<(String, Vec<f64>)>,
    pub documents: Vec<Document>,
    /// Planted score per region, keyed by construct.
    pub truth: BTreeMap<String, BTreeMap<RegionId, f64>>,
    pub seeds: Vec<(String, Vec<String>)>,
    pub planted: Vec<(String, Vec<String>)>,
    pub confounders: Vec<(String, Vec<String>)>,
    /// State-level indicators, `<construct>_i<k>` columns.
    pub indicators: IndicatorTable,
    /// County to state.
    pub mapping: Vec<(RegionId, RegionId)>,
    pub features: Vec<FeatureRow>,
}

impl SynthDataset {
    pub fn indicator_names(&self, construct: &str) -> Vec<String> {
        let prefix = format!("{construct}_i");
        self.indicators.names.iter().filter(|n| n.starts_with(&prefix)).cloned().collect()
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.into()));
        if self.n_regions == 0 || self.n_constructs == 0 || self.words_per_construct == 0 {
            return bad("n_regions, n_constructs and words_per_construct must be positive");
        }
        if self.dim < 2 {
            return bad("dim must be at least 2");
        }
        let topical = self.n_constructs * (self.words_per_construct + self.confounder_count);
        if self.vocab_size < topical {
            return Err(SynthError::InvalidSpec(format!(
                "vocab_size {} is smaller than the {} planted and confounder words",
                self.vocab_size, topical
            )));
        }
        if !(self.signal_strength >= 0.0 && self.signal_strength <= 1.0) {
            return bad("signal_strength must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.noise_vocab_fraction) {
            return bad("noise_vocab_fraction must lie in [0, 1]");
        }
        if self.vocab_size == topical && self.noise_vocab_fraction > 0.0 {
            return bad("no filler vocabulary left for noise tokens");
        }
        if !(self.indicator_noise >= 0.0) {
            return bad("indicator_noise must be non-negative");
        }
        let need = self.n_constructs + 1;
        if self.dim < need {
            return Err(SynthError::Infeasible {
                dim: self.dim,
                constructs: self.n_constructs,
                need,
            });
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }
}

/// Standard normal draw via Box-Muller.
pub(crate) fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2)
}

fn round6(x: f64) -> f64 {
    libm::round(x * 1e6) / 1e6
}

/// Random unit vector supported on coordinates `from..dim`.
fn complement_unit(rng: &mut ChaCha8Rng, dim: usize, from: usize) -> Vec<f64> {
    loop {
        let mut v = alloc::vec![0.0; dim];
        for x in v.iter_mut().skip(from) {
            *x = normal(rng);
        }
        let n = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if n > 1e-9 {
            v.iter_mut().for_each(|x| *x /= n);
            return v;
        }
    }
}

pub fn construct_name(c: usize) -> String {
    format!("construct{c}")
}

/// Synthetic county centroid inside the contiguous-US bounding box.
fn random_site(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let lat = 25.0 + 24.0 * rng.random::<f64>();
    let lon = -124.0 + 57.0 * rng.random::<f64>();
    (round6(lat), round6(lon))
}

fn random_socio(rng: &mut ChaCha8Rng) -> [f64; 11] {
    let mut u = |lo: f64, hi: f64| round6(lo + (hi - lo) * rng.random::<f64>());
    [
        u(25_000.0, 120_000.0),
        u(5.0, 60.0),
        u(1.0, 15.0),
        u(60.0, 98.0),
        u(1.0, 5_000.0),
        u(25.0, 55.0),
        u(0.0, 100.0),
        u(0.0, 60.0),
        u(45.0, 55.0),
        u(30.0, 65.0),
        u(0.0, 60.0),
    ]
}

/// Builds a dataset deterministically from `spec.seed`.
pub fn generate(spec: &SynthSpec) -> Result<SynthDataset, SynthError> {
    spec.validate()?;
    let (nc, w, x, dim) = (spec.n_constructs, spec.words_per_construct, spec.confounder_count, spec.dim);
    let constructs: Vec<String> = (0..nc).map(construct_name).collect();

    // Embeddings.
    let mut erng = spec.rng(1);
    let mut embeddings = Vec::with_capacity(spec.vocab_size);
    let mut planted = Vec::new();
    let mut confounders = Vec::new();
    for (c, name) in constructs.iter().enumerate() {
        let mut cluster = |label: char, k: usize| -> Vec<String> {
            (0..k)
                .map(|j| {
                    let word = format!("c{c}{label}{j:02}");
                    let mut v = complement_unit(&mut erng, dim, nc);
                    v.iter_mut().for_each(|e| *e *= PERTURBATION);
                    v[c] = 1.0;
                    embeddings.push((word.clone(), v.into_iter().map(round6).collect()));
                    word
                })
                .collect()
        };
        planted.push((name.clone(), cluster('w', w)));
        confounders.push((name.clone(), cluster('x', x)));
    }
    let n_filler = spec.vocab_size - nc * (w + x);
    let filler: Vec<String> = (0..n_filler).map(|j| format!("n{j:05}")).collect();
    for word in &filler {
        let v = complement_unit(&mut erng, dim, nc);
        embeddings.push((word.clone(), v.into_iter().map(round6).collect()));
    }
    check_geometry(&embeddings, nc, w + x)?;

    // Regions, coordinates and planted scores.
    let mut grng = spec.rng(2);
    let n_states = spec.n_regions.min(STATES.len());
    let shape: Vec<(f64, f64, f64)> = (0..nc)
        .map(|_| {
            (
                0.5 + grng.random::<f64>(),
                0.5 + grng.random::<f64>(),
                2.0 * PI * grng.random::<f64>(),
            )
        })
        .collect();
    let mut regions = Vec::with_capacity(spec.n_regions);
    let mut mapping = Vec::with_capacity(spec.n_regions);
    let mut features = Vec::with_capacity(spec.n_regions);
    let mut truth: BTreeMap<String, BTreeMap<RegionId, f64>> = BTreeMap::new();
    for i in 0..spec.n_regions {
        let (sfips, scode) = STATES[i % n_states];
        let county = RegionId::parse(&format!("{sfips}{:03}", 2 * (i / n_states) + 1))
            .map_err(|e| SynthError::InvalidSpec(format!("{e}")))?;
        let state = RegionId::parse(scode).map_err(|e| SynthError::InvalidSpec(format!("{e}")))?;
        let (lat, lon) = random_site(&mut grng);
        let socio = random_socio(&mut grng);
        let (a, b) = ((lat - 25.0) / 24.0, (lon + 124.0) / 57.0);
        for (c, name) in constructs.iter().enumerate() {
            let (f1, f2, ph) = shape[c];
            let t = round6(0.5 + 0.5 * libm::sin(2.0 * PI * (f1 * a + f2 * b) + ph));
            truth.entry(name.clone()).or_default().insert(county.clone(), t);
        }
        features.push(FeatureRow {
            region: county.clone(),
            lat,
            lon,
            socio,
        });
        mapping.push((county.clone(), state));
        regions.push(county);
    }

    // Documents.
    let mut drng = spec.rng(3);
    let q = (1.0 - spec.noise_vocab_fraction) / (2.0 * nc as f64 * (w + x) as f64);
    let mut documents = Vec::with_capacity(spec.n_regions * spec.docs_per_region);
    let mut text = String::new();
    for region in &regions {
        // Cumulative emission probabilities for this region's topical words.
        let mut cum = Vec::with_capacity(nc * (w + x));
        let mut acc = 0.0;
        for (c, name) in constructs.iter().enumerate() {
            let t = truth[name][region];
            let m = spec.signal_strength * (2.0 * t - 1.0);
            for word in &planted[c].1 {
                acc += q * (1.0 + m);
                cum.push((acc, word.as_str()));
            }
            for word in &confounders[c].1 {
                acc += q * (1.0 - m);
                cum.push((acc, word.as_str()));
            }
        }
        for _ in 0..spec.docs_per_region {
            text.clear();
            for k in 0..spec.tokens_per_doc {
                if k > 0 {
                    text.push(' ');
                }
                let u: f64 = drng.random();
                let word = match cum.iter().find(|(p, _)| u < *p) {
                    Some((_, wd)) => *wd,
                    None if filler.is_empty() => cum.last().map_or("", |(_, wd)| *wd),
                    None => filler[drng.random_range(0..filler.len())].as_str(),
                };
                text.push_str(word);
            }
            documents.push(Document::new(region.clone(), text.clone()));
        }
    }

    // State indicators: mean planted score plus noise.
    let mut irng = spec.rng(4);
    let mut states: Vec<RegionId> = mapping.iter().map(|(_, s)| s.clone()).collect();
    states.sort();
    states.dedup();
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for name in &constructs {
        let mut sums: BTreeMap<&RegionId, (f64, usize)> = BTreeMap::new();
        for (county, state) in &mapping {
            let e = sums.entry(state).or_insert((0.0, 0));
            e.0 += truth[name][county];
            e.1 += 1;
        }
        for k in 1..=spec.indicators_per_construct {
            names.push(format!("{name}_i{k}"));
            columns.push(
                states
                    .iter()
                    .map(|s| {
                        let (sum, n) = sums[s];
                        Some(round6(sum / n as f64 + spec.indicator_noise * normal(&mut irng)))
                    })
                    .collect(),
            );
        }
    }

    let seeds = planted
        .iter()
        .map(|(c, ws)| (c.clone(), ws.iter().take(SEEDS_PER_CONSTRUCT).cloned().collect()))
        .collect();
    Ok(SynthDataset {
        constructs,
        embeddings,
        documents,
        truth,
        seeds,
        planted,
        confounders,
        indicators: IndicatorTable {
            units: states,
            names,
            columns,
        },
        mapping,
        features,
    })
}

fn check_geometry(rows: &[(String, Vec<f64>)], nc: usize, per_cluster: usize) -> Result<(), SynthError> {
    let n = nc * per_cluster;
    for i in 0..n {
        for j in i + 1..n {
            let s = cosine(&rows[i].1, &rows[j].1)
                .map_err(|e| SynthError::Geometry(format!("{e}")))?
                .value();
            let same = i / per_cluster == j / per_cluster;
            if (same && s < 0.8) || (!same && s > 0.3) {
                return Err(SynthError::Geometry(format!(
                    "cosine({}, {}) = {s:.4}",
                    rows[i].0, rows[j].0
                )));
            }
        }
    }
    Ok(())
}

/// A smooth scalar field over synthetic counties, for interpolation checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub rows: Vec<FeatureRow>,
    pub values: Vec<f64>,
}

/// `n` counties with features and a smooth target mostly driven by location.
pub fn generate_field(n: usize, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(5);
    let mut rows = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let (sfips, _) = STATES[i % STATES.len()];
        let region = RegionId::parse(&format!("{sfips}{:03}", 2 * (i / STATES.len()) + 1))
            .expect("generated FIPS codes are well formed");
        let (lat, lon) = random_site(&mut rng);
        let socio = random_socio(&mut rng);
        let (a, b) = ((lat - 25.0) / 24.0, (lon + 124.0) / 57.0);
        let v = libm::sin(3.0 * a) + libm::cos(4.0 * b) + 0.3 * (socio[1] - 30.0) / 15.0 + 0.05 * normal(&mut rng);
        rows.push(FeatureRow {
            region,
            lat,
            lon,
            socio,
        });
        values.push(round6(v));
    }
    Field { rows, values }
}

/// Fast bulk corpus of `n_docs` uniform-vocabulary documents for throughput runs.
pub fn bulk_documents(n_docs: usize, tokens_per_doc: usize, n_regions: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(6);
    let regions: Vec<RegionId> = (0..n_regions.max(1))
        .map(|i| {
            let (sfips, _) = STATES[i % STATES.len()];
            RegionId::parse(&format!("{sfips}{:03}", 2 * (i / STATES.len()) + 1)).expect("valid FIPS")
        })
        .collect();
    let mut out = Vec::with_capacity(n_docs);
    let mut text = String::with_capacity(tokens_per_doc * 8);
    for _ in 0..n_docs {
        text.clear();
        for k in 0..tokens_per_doc {
            if k > 0 {
                text.push(' ');
            }
            let j: u32 = rng.random_range(0..5000);
            text.push_str(&format!("w{j}"));
            if j % 97 == 0 {
                text.push('!');
            }
        }
        let r = &regions[rng.random_range(0..regions.len())];
        out.push(Document::new(r.clone(), text.clone()));
    }
    out
}

//! TOML run configuration with one section per pipeline stage.
//!
//! Relative paths are resolved against the directory holding the config file.
//! Command-line `--set section.key=value` overrides are merged into the TOML
//! tree before it is deserialized, so they follow the same typing rules.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use kgl_core::gp::GpConfig;
use kgl_core::lexicon::UnresolvedPolicy;
use kgl_core::stats::BootstrapConfig;
use kgl_core::synth::SynthSpec;
use kgl_core::{LexiconConfig, Normalization};
use serde::{Deserialize, Serialize};

use crate::error::{KglError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub embeddings: Option<PathBuf>,
    pub seeds: Vec<PathBuf>,
    /// Raw documents, `region_id<TAB>text`.
    pub documents: Option<PathBuf>,
    /// Precomputed `region_id,word,count|freq` table; used when `documents` is unset.
    pub counts: Option<PathBuf>,
    pub indicators: Option<PathBuf>,
    pub features: Option<PathBuf>,
    /// County to state `fips,code`.
    pub mappings: Option<PathBuf>,
    /// County community labels `fips,community`.
    pub communities: Option<PathBuf>,
    /// GeoJSON FeatureCollection of county boundaries.
    pub boundaries: Option<PathBuf>,
    /// Region score CSV for `interpolate`; defaults to the score output.
    pub scores: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            embeddings: None,
            seeds: Vec::new(),
            documents: None,
            counts: None,
            indicators: None,
            features: None,
            mappings: None,
            communities: None,
            boundaries: None,
            scores: None,
            output: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconSection {
    pub tau_syn: f64,
    pub tau_con: f64,
    pub theta: f64,
    pub min_regions: usize,
    pub min_rel_freq: f64,
    pub max_neighbors: Option<usize>,
    pub max_embedding_rank: Option<u32>,
    /// `error` or `skip` for seeds absent from the embeddings.
    pub unresolved: String,
}

impl Default for LexiconSection {
    fn default() -> Self {
        let d = LexiconConfig::default();
        Self {
            tau_syn: d.tau_syn,
            tau_con: d.tau_con,
            theta: d.theta,
            min_regions: d.min_regions,
            min_rel_freq: d.min_rel_freq,
            max_neighbors: None,
            max_embedding_rank: None,
            unresolved: "error".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    /// Regions with fewer documents are dropped (raw documents only).
    pub min_documents: u64,
    /// `relative` or `raw`.
    pub normalization: String,
    pub shards: Option<usize>,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            min_documents: 100,
            normalization: "relative".into(),
            shards: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreSection {
    /// Construct names used for the difference score and map properties.
    pub individualism: String,
    pub collectivism: String,
    pub min_counties: usize,
}

impl Default for ScoreSection {
    fn default() -> Self {
        Self {
            individualism: "individualism".into(),
            collectivism: "collectivism".into(),
            min_counties: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    /// Indicators averaged into the validity summary, per construct. The key
    /// `"*"` applies to constructs without their own entry; no entry means all.
    pub primary: BTreeMap<String, Vec<String>>,
    /// Extra methods: name to state-level score CSV.
    pub methods: BTreeMap<String, PathBuf>,
    /// Also score a seeds-only lexicon as the `seeds-only` method.
    pub seed_baseline: bool,
    /// Method pairs tested with the bootstrap.
    pub compare: Vec<[String; 2]>,
    pub alpha: f64,
    pub subset_min_size: usize,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            primary: BTreeMap::new(),
            methods: BTreeMap::new(),
            seed_baseline: true,
            compare: vec![["kgl".into(), "seeds-only".into()]],
            alpha: 0.05,
            subset_min_size: 3,
        }
    }
}

impl ValidateSection {
    pub fn primary_for(&self, construct: &str) -> Vec<String> {
        self.primary
            .get(construct)
            .or_else(|| self.primary.get("*"))
            .cloned()
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSection {
    pub n_boot: usize,
    pub seed: u64,
    pub level: f64,
}

impl Default for BootstrapSection {
    fn default() -> Self {
        let d = BootstrapConfig::default();
        Self {
            n_boot: d.n_boot,
            seed: d.seed,
            level: d.level,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpSection {
    pub lr: f64,
    pub iters: usize,
    pub jitter: f64,
    pub seed: u64,
    /// Cap on rows used for hyperparameter fitting; 0 uses every row.
    pub max_fit_points: usize,
    /// Construct to interpolate; `diff` when present, else the only construct.
    pub target: Option<String>,
    /// When set, also report held-out RMSE on this share of observed rows.
    pub holdout_fraction: Option<f64>,
}

impl Default for GpSection {
    fn default() -> Self {
        let d = GpConfig::default();
        Self {
            lr: d.lr,
            iters: d.iters,
            jitter: d.jitter,
            seed: d.seed,
            max_fit_points: d.max_fit_points.unwrap_or(0),
            target: None,
            holdout_fraction: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateSection {
    pub synonym_grid: Vec<f64>,
    pub concept_grid: Vec<f64>,
    pub purification_grid: Vec<f64>,
}

impl Default for AblateSection {
    fn default() -> Self {
        Self {
            synonym_grid: vec![0.7, 0.75, 0.8],
            concept_grid: vec![0.4, 0.45, 0.5],
            purification_grid: vec![0.0, 0.05, 0.1, 0.15, 0.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_regions: usize,
    pub n_constructs: usize,
    pub words_per_construct: usize,
    pub vocab_size: usize,
    pub dim: usize,
    pub signal_strength: f64,
    pub noise_vocab_fraction: f64,
    pub confounder_count: usize,
    pub seed: u64,
    pub docs_per_region: usize,
    pub tokens_per_doc: usize,
    pub indicators_per_construct: usize,
    pub indicator_noise: f64,
    /// Counties in the separate interpolation field fixture (0 to skip).
    pub field_counties: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = SynthSpec::default();
        Self {
            n_regions: d.n_regions,
            n_constructs: d.n_constructs,
            words_per_construct: d.words_per_construct,
            vocab_size: d.vocab_size,
            dim: d.dim,
            signal_strength: d.signal_strength,
            noise_vocab_fraction: d.noise_vocab_fraction,
            confounder_count: d.confounder_count,
            seed: d.seed,
            docs_per_region: d.docs_per_region,
            tokens_per_doc: d.tokens_per_doc,
            indicators_per_construct: d.indicators_per_construct,
            indicator_noise: d.indicator_noise,
            field_counties: 300,
        }
    }
}

impl SynthSection {
    pub fn spec(&self) -> SynthSpec {
        SynthSpec {
            n_regions: self.n_regions,
            n_constructs: self.n_constructs,
            words_per_construct: self.words_per_construct,
            vocab_size: self.vocab_size,
            dim: self.dim,
            signal_strength: self.signal_strength,
            noise_vocab_fraction: self.noise_vocab_fraction,
            confounder_count: self.confounder_count,
            seed: self.seed,
            docs_per_region: self.docs_per_region,
            tokens_per_doc: self.tokens_per_doc,
            indicators_per_construct: self.indicators_per_construct,
            indicator_noise: self.indicator_noise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub lexicon: LexiconSection,
    pub corpus: CorpusSection,
    pub score: ScoreSection,
    pub validate: ValidateSection,
    pub bootstrap: BootstrapSection,
    pub gp: GpSection,
    pub ablate: AblateSection,
    pub synth: SynthSection,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Sets `a.b.c = value` inside a TOML table, creating tables on the way.
fn set_dotted(root: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let (last, path) = parts.split_last().ok_or_else(|| KglError::config("empty override key"))?;
    let mut table = root;
    for p in path {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| KglError::config(format!("override {key}: {p} is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// Parses the value side of `key=value` as TOML, falling back to a bare string.
fn parse_override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl RunConfig {
    /// Reads a config file (or starts from defaults) and applies `key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let (mut table, base_dir) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| KglError::config(format!("cannot read config {}: {e}", p.display())))?;
                let t: toml::Table = text
                    .parse()
                    .map_err(|e| KglError::config(format!("{}: {e}", p.display())))?;
                (t, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (toml::Table::new(), PathBuf::new()),
        };
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| KglError::config(format!("override {o:?} is not key=value")))?;
            set_dotted(&mut table, k.trim(), parse_override_value(v.trim()))?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| KglError::config(e.to_string()))?;
        cfg.base_dir = base_dir;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| KglError::config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.lexicon_config()?.validate().map_err(KglError::config)?;
        self.normalization()?;
        for (name, grid) in [
            ("synonym_grid", &self.ablate.synonym_grid),
            ("concept_grid", &self.ablate.concept_grid),
        ] {
            if grid.is_empty() || grid.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
                return Err(KglError::config(format!("ablate.{name} must be nonempty with values in (0,1)")));
            }
        }
        if self.ablate.purification_grid.is_empty() || self.ablate.purification_grid.iter().any(|v| !(*v >= 0.0)) {
            return Err(KglError::config("ablate.purification_grid must be nonempty and non-negative"));
        }
        if !(self.bootstrap.level > 0.0 && self.bootstrap.level < 1.0) || self.bootstrap.n_boot == 0 {
            return Err(KglError::config("bootstrap.level must lie in (0,1) and n_boot be positive"));
        }
        if !(self.gp.lr > 0.0) || !(self.gp.jitter > 0.0) {
            return Err(KglError::config("gp.lr and gp.jitter must be positive"));
        }
        if let Some(f) = self.gp.holdout_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(KglError::config("gp.holdout_fraction must lie in (0,1)"));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.paths.output)
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.output_dir().join(name)
    }

    /// Resolves a required input path, failing with an input error naming it.
    pub fn require(&self, field: &str, p: &Option<PathBuf>) -> Result<PathBuf> {
        let p = p
            .as_ref()
            .ok_or_else(|| KglError::config(format!("paths.{field} is not set")))?;
        let full = self.resolve(p);
        if !full.exists() {
            return Err(KglError::input(&full, format!("paths.{field} does not exist")));
        }
        Ok(full)
    }

    pub fn normalization(&self) -> Result<Normalization> {
        match self.corpus.normalization.as_str() {
            "relative" => Ok(Normalization::Relative),
            "raw" => Ok(Normalization::Raw),
            other => Err(KglError::config(format!("corpus.normalization {other:?} (expected relative or raw)"))),
        }
    }

    pub fn lexicon_config(&self) -> Result<LexiconConfig> {
        let l = &self.lexicon;
        let unresolved = match l.unresolved.as_str() {
            "error" => UnresolvedPolicy::Error,
            "skip" => UnresolvedPolicy::Skip,
            other => return Err(KglError::config(format!("lexicon.unresolved {other:?} (expected error or skip)"))),
        };
        Ok(LexiconConfig {
            tau_syn: l.tau_syn,
            tau_con: l.tau_con,
            theta: l.theta,
            min_regions: l.min_regions,
            min_rel_freq: l.min_rel_freq,
            max_neighbors: l.max_neighbors,
            max_embedding_rank: l.max_embedding_rank,
            unresolved,
            normalization: self.normalization()?,
        })
    }

    pub fn bootstrap_config(&self) -> BootstrapConfig {
        BootstrapConfig {
            n_boot: self.bootstrap.n_boot,
            seed: self.bootstrap.seed,
            level: self.bootstrap.level,
        }
    }

    pub fn gp_config(&self) -> GpConfig {
        GpConfig {
            lr: self.gp.lr,
            iters: self.gp.iters,
            jitter: self.gp.jitter,
            seed: self.gp.seed,
            max_fit_points: (self.gp.max_fit_points > 0).then_some(self.gp.max_fit_points),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml_str(&cfg.to_toml_string(), Path::new("")).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.lexicon.tau_syn, 0.75);
        assert_eq!(cfg.lexicon.tau_con, 0.45);
        assert_eq!(cfg.lexicon.theta, 0.15);
    }

    #[test]
    fn overrides_apply() {
        let cfg = RunConfig::load(
            None,
            &["lexicon.theta=0.05".into(), "paths.output=\"x\"".into(), "paths.embeddings=emb.txt".into()],
        )
        .unwrap();
        assert_eq!(cfg.lexicon.theta, 0.05);
        assert_eq!(cfg.paths.output, PathBuf::from("x"));
        assert_eq!(cfg.paths.embeddings, Some(PathBuf::from("emb.txt")));
    }

    #[test]
    fn rejects_bad_values() {
        for o in ["lexicon.tau_syn=1.0", "lexicon.theta=-0.1", "corpus.normalization=\"log\"", "lexicon.nope=1"] {
            let e = RunConfig::load(None, &[o.to_string()]).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{o}");
        }
    }
}

use std::collections::BTreeMap;
use std::path::PathBuf;

use kgl_core::synth::{generate, generate_field, SynthDataset, SynthError};
use kgl_core::{ScoreRow, ScoreTable};

use crate::config::RunConfig;
use crate::error::{KglError, Result};
use crate::io;
use crate::manifest::{Manifest, Recorder};

pub const CONFIG_FILE: &str = "kgl.toml";
/// Every `FIELD_HOLDOUT`-th field county is left unscored for interpolation.
const FIELD_HOLDOUT: usize = 5;

pub struct SynthOutput {
    pub dataset: SynthDataset,
    pub manifest: Manifest,
}

fn synth_error(e: SynthError) -> KglError {
    match e {
        SynthError::InvalidSpec(_) | SynthError::Infeasible { .. } => KglError::config(e),
        SynthError::Geometry(_) => KglError::numeric(e),
    }
}

/// Config that runs the full pipeline on the generated files, paths relative to it.
fn pipeline_config(cfg: &RunConfig, data: &SynthDataset) -> RunConfig {
    let mut run = RunConfig::default();
    run.paths.embeddings = Some("embeddings.txt".into());
    run.paths.seeds = data.constructs.iter().map(|c| PathBuf::from(format!("seeds_{c}.txt"))).collect();
    run.paths.documents = Some("documents.tsv".into());
    run.paths.indicators = Some("indicators.csv".into());
    run.paths.mappings = Some("mappings.csv".into());
    run.paths.features = Some("features.csv".into());
    run.paths.output = "run".into();
    run.lexicon = cfg.lexicon.clone();
    run.corpus.min_documents = cfg.corpus.min_documents.min(cfg.synth.docs_per_region as u64);
    if let [a, b, ..] = data.constructs.as_slice() {
        run.score.individualism = a.clone();
        run.score.collectivism = b.clone();
    }
    run.validate.primary = data.constructs.iter().map(|c| (c.clone(), data.indicator_names(c))).collect::<BTreeMap<_, _>>();
    run.bootstrap = cfg.bootstrap.clone();
    run.gp = cfg.gp.clone();
    run.synth = cfg.synth.clone();
    run
}

/// Writes the field fixture: features for every county, scores for most.
fn write_field(cfg: &RunConfig, rec: &mut Recorder) -> Result<()> {
    let field = generate_field(cfg.synth.field_counties, cfg.synth.seed);
    let rows: Vec<ScoreRow> = field
        .rows
        .iter()
        .zip(&field.values)
        .enumerate()
        .filter(|(i, _)| i % FIELD_HOLDOUT != 0)
        .map(|(_, (f, &v))| ScoreRow {
            region: f.region.clone(),
            construct: "field".into(),
            score: v,
            n_docs: None,
            score_norm: None,
        })
        .collect();
    let truth = BTreeMap::from([(
        "field".to_string(),
        field.rows.iter().zip(&field.values).map(|(f, &v)| (f.region.clone(), v)).collect(),
    )]);
    io::tables::write_features(&cfg.output("field/features.csv"), &field.rows)?;
    io::tables::write_scores(&cfg.output("field/scores.csv"), &ScoreTable::new(rows))?;
    io::tables::write_truth(&cfg.output("field/truth.csv"), &truth)?;
    let mut run = RunConfig::default();
    run.paths.features = Some("features.csv".into());
    run.paths.scores = Some("scores.csv".into());
    run.paths.output = "run".into();
    run.gp = cfg.gp.clone();
    run.gp.target = Some("field".into());
    run.gp.holdout_fraction = Some(cfg.gp.holdout_fraction.unwrap_or(0.2));
    io::write_text(&cfg.output("field/kgl.toml"), &run.to_toml_string())?;
    for f in ["field/features.csv", "field/scores.csv", "field/truth.csv", "field/kgl.toml"] {
        rec.output(f);
    }
    Ok(())
}

/// Generates a planted-signal dataset plus a ready-to-run config in the output directory.
pub fn run(cfg: &RunConfig) -> Result<SynthOutput> {
    let mut rec = Recorder::new("synth");
    let data = generate(&cfg.synth.spec()).map_err(synth_error)?;
    io::embeddings::write_embeddings(&cfg.output("embeddings.txt"), &data.embeddings)?;
    io::corpus::write_documents(&cfg.output("documents.tsv"), &data.documents)?;
    io::tables::write_truth(&cfg.output("truth.csv"), &data.truth)?;
    io::tables::write_indicators(&cfg.output("indicators.csv"), &data.indicators)?;
    io::tables::write_mappings(&cfg.output("mappings.csv"), &data.mapping)?;
    io::tables::write_features(&cfg.output("features.csv"), &data.features)?;
    for f in ["embeddings.txt", "documents.tsv", "truth.csv", "indicators.csv", "mappings.csv", "features.csv"] {
        rec.output(f);
    }
    for (c, words) in &data.seeds {
        let name = format!("seeds_{c}.txt");
        io::tables::write_seeds(&cfg.output(&name), c, words)?;
        rec.output(&name);
    }
    let lists = |v: &[(String, Vec<String>)]| v.iter().cloned().collect::<BTreeMap<_, _>>();
    let header: Vec<String> = ["construct", "word", "kind"].iter().map(|s| s.to_string()).collect();
    let mut planted = Vec::new();
    for (kind, set) in [("planted", &data.planted), ("confounder", &data.confounders)] {
        for (c, words) in set {
            planted.extend(words.iter().map(|w| vec![c.clone(), w.clone(), kind.to_string()]));
        }
    }
    io::tables::write_rows(&cfg.output("planted.csv"), &header, &planted)?;
    rec.output("planted.csv");
    io::write_text(&cfg.output(CONFIG_FILE), &pipeline_config(cfg, &data).to_toml_string())?;
    rec.output(CONFIG_FILE);
    if cfg.synth.field_counties > 0 {
        write_field(cfg, &mut rec)?;
    }
    rec.detail("constructs", &data.constructs);
    rec.detail("planted", lists(&data.planted));
    rec.detail("confounders", lists(&data.confounders));
    rec.detail("documents", data.documents.len());
    let manifest = rec.finish(cfg)?;
    Ok(SynthOutput { dataset: data, manifest })
}

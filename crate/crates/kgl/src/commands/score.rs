use kgl_core::scoring::{community_summary, diff_score, normalize01};
use kgl_core::{Lexicon, ScoreTable};

use super::{lexicon_file, load_counts, load_mappings, load_seeds, phrase_set, score, to_state};
use crate::config::RunConfig;
use crate::error::{KglError, Result};
use crate::geojson::{self, MapScores};
use crate::io;
use crate::manifest::{Manifest, Recorder};

pub const REGION_SCORES: &str = "scores_region.csv";
pub const STATE_SCORES: &str = "scores_state.csv";

pub struct ScoreOutput {
    /// Base-region scores for every construct plus `diff` when both poles exist.
    pub regions: ScoreTable,
    /// State aggregates; empty without a mapping for county input.
    pub states: ScoreTable,
    pub manifest: Manifest,
}

/// Normalizes each construct to [0, 1] and appends the difference score when
/// both configured poles are present.
pub(crate) fn finish_table(cfg: &RunConfig, raw: &ScoreTable) -> Result<ScoreTable> {
    if raw.is_empty() {
        return Ok(raw.clone());
    }
    let mut table = normalize01(raw).map_err(KglError::numeric)?;
    let (ind, col) = (&cfg.score.individualism, &cfg.score.collectivism);
    let names = table.constructs();
    if names.contains(ind) && names.contains(col) {
        let diff = diff_score(&table.construct(ind), &table.construct(col), true).map_err(KglError::numeric)?;
        let diff = normalize01(&diff).map_err(KglError::numeric)?;
        table.extend(diff);
    }
    Ok(table)
}

/// Loads the lexicon CSVs written by `build` for the configured constructs.
pub(crate) fn load_lexica(cfg: &RunConfig, rec: &mut Recorder, only: Option<&str>) -> Result<Vec<Lexicon>> {
    let seeds = load_seeds(cfg, rec, only)?;
    let mut out = Vec::new();
    for s in seeds {
        let name = lexicon_file(s.construct());
        let path = cfg.output(&name);
        if !path.exists() {
            return Err(KglError::input(&path, "lexicon not found; run build first"));
        }
        rec.detail(&format!("lexicon_{}_sha256", s.construct()), crate::manifest::sha256_file(&path)?);
        out.push(io::tables::read_lexicon(&path, s.construct())?);
    }
    Ok(out)
}

/// Scores every region with the built lexica and writes region, state,
/// community and (optionally) GeoJSON outputs.
pub fn run(cfg: &RunConfig, only: Option<&str>) -> Result<ScoreOutput> {
    let mut rec = Recorder::new("score");
    let lexica = load_lexica(cfg, &mut rec, only)?;
    let counts = load_counts(cfg, &mut rec, &phrase_set(&lexica))?;
    let mode = cfg.normalization()?;
    let mut raw = ScoreTable::default();
    for lex in &lexica {
        raw.extend(score(lex, &counts, mode));
    }
    let regions = finish_table(cfg, &raw)?;
    io::tables::write_scores(&cfg.output(REGION_SCORES), &regions)?;
    rec.output(REGION_SCORES);

    let mapping = load_mappings(cfg, &mut rec)?;
    let states = if mapping.is_some() || raw.rows.iter().all(|r| !r.region.is_county()) {
        let s = finish_table(cfg, &to_state(cfg, &raw, mapping.as_ref())?)?;
        io::tables::write_scores(&cfg.output(STATE_SCORES), &s)?;
        rec.output(STATE_SCORES);
        s
    } else {
        log::info!("no paths.mappings; state aggregates skipped");
        ScoreTable::default()
    };

    let (ind, col) = (&cfg.score.individualism, &cfg.score.collectivism);
    if let Some(p) = &cfg.paths.communities {
        let full = cfg.require("communities", &cfg.paths.communities)?;
        rec.input(cfg, p)?;
        let map = io::tables::read_communities(&full)?;
        let rows = community_summary(&raw.construct(ind), &raw.construct(col), &map, cfg.score.min_counties);
        io::tables::write_community_summary(&cfg.output("community_summary.csv"), &rows)?;
        rec.output("community_summary.csv");
    }
    if let Some(p) = &cfg.paths.boundaries {
        let full = cfg.require("boundaries", &cfg.paths.boundaries)?;
        rec.input(cfg, p)?;
        let boundaries = geojson::read_boundaries(&full)?;
        let pick = |c: &str| regions.score_map(c);
        let scores = MapScores {
            individualism: pick(ind),
            collectivism: pick(col),
            diff: pick("diff"),
        };
        let fc = geojson::annotate(&boundaries, &scores, &full)?;
        let mut text = serde_json::to_string(&fc).expect("json");
        text.push('\n');
        io::write_text(&cfg.output("scores.geojson"), &text)?;
        rec.output("scores.geojson");
    }
    rec.detail("regions_scored", counts.len());
    rec.detail("lexicon_sizes", lexica.iter().map(|l| (l.construct().to_string(), l.len())).collect::<std::collections::BTreeMap<_, _>>());
    let manifest = rec.finish(cfg)?;
    Ok(ScoreOutput {
        regions,
        states,
        manifest,
    })
}

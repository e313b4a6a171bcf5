use kgl_core::lexicon::{expand, prune, BuildReport};
use kgl_core::stats::IndicatorTable;
use kgl_core::{Lexicon, LexiconConfig, RegionId, ScoreTable};
use std::collections::BTreeMap;

use super::validate::format_cell;
use super::{expand_error, load_counts, load_embeddings, load_mappings, load_seeds, phrase_set, prune_error, score, to_state};
use crate::config::RunConfig;
use crate::error::{KglError, Result};
use crate::io;
use crate::manifest::{Manifest, Recorder};

/// One grid point for one construct.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub construct: String,
    /// `(concept, synonym)` for expansion rows, `theta` for purification rows.
    pub thresholds: Vec<f64>,
    pub lexicon_length: usize,
    pub cells: Vec<(String, Option<kgl_core::CorrelationResult>)>,
    pub average_validity: Option<f64>,
}

pub struct AblateOutput {
    pub expansion: Vec<AblationRow>,
    pub purification: Vec<AblationRow>,
    pub manifest: Manifest,
}

struct Context<'a> {
    cfg: &'a RunConfig,
    indicators: &'a IndicatorTable,
    mapping: Option<BTreeMap<RegionId, RegionId>>,
}

impl Context<'_> {
    fn evaluate(&self, lex: &Lexicon, counts: &kgl_core::RegionCounts, thresholds: Vec<f64>) -> Result<AblationRow> {
        let c = lex.construct();
        let raw: ScoreTable = score(lex, counts, self.cfg.normalization()?);
        let state = to_state(self.cfg, &raw, self.mapping.as_ref())?;
        let primary = self.cfg.validate.primary_for(c);
        let mut rows = kgl_core::stats::validate_scores(&state, self.indicators, &primary).map_err(|e| KglError::numeric(format!("{c}: {e}")))?;
        let row = rows.pop().ok_or_else(|| KglError::numeric(format!("{c}: no scores")))?;
        Ok(AblationRow {
            construct: c.to_string(),
            thresholds,
            lexicon_length: lex.len(),
            cells: row.cells,
            average_validity: row.average_validity,
        })
    }
}

fn write_table(cfg: &RunConfig, name: &str, lead: &[&str], names: &[String], rows: &[AblationRow]) -> Result<()> {
    let mut header = vec!["construct".to_string()];
    header.extend(lead.iter().map(|s| s.to_string()));
    header.push("lexicon_length".into());
    header.extend(names.iter().cloned());
    header.push("average_validity".into());
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut line = vec![r.construct.clone()];
            line.extend(r.thresholds.iter().map(|t| io::fmt_f64(*t)));
            line.push(r.lexicon_length.to_string());
            line.extend(r.cells.iter().map(|(_, c)| format_cell(c.as_ref(), cfg.validate.alpha)));
            line.push(r.average_validity.map_or(String::new(), |v| format!("{v:.3}")));
            line
        })
        .collect();
    io::tables::write_rows(&cfg.output(name), &header, &body)
}

/// Sweeps expansion thresholds (concept outer, synonym inner) at the configured
/// purification threshold, then purification thresholds at the configured
/// expansion thresholds. The corpus is counted once for every candidate.
pub fn run(cfg: &RunConfig) -> Result<AblateOutput> {
    let mut rec = Recorder::new("ablate");
    let base = cfg.lexicon_config()?;
    let seeds = load_seeds(cfg, &mut rec, None)?;
    let table = load_embeddings(cfg, &mut rec)?;
    let ind_path = cfg.require("indicators", &cfg.paths.indicators)?;
    rec.input(cfg, cfg.paths.indicators.as_ref().expect("required"))?;
    let indicators = io::tables::read_indicators(&ind_path)?;

    let mut grid: Vec<(LexiconConfig, Vec<f64>)> = Vec::new();
    for &con in &cfg.ablate.concept_grid {
        for &syn in &cfg.ablate.synonym_grid {
            grid.push((
                LexiconConfig {
                    tau_con: con,
                    tau_syn: syn,
                    ..base.clone()
                },
                vec![con, syn],
            ));
        }
    }
    let mut expanded: Vec<Vec<(Lexicon, BuildReport)>> = Vec::new();
    for (lc, _) in &grid {
        expanded.push(seeds.iter().map(|s| expand(lc, &table, s).map_err(|e| expand_error(cfg, e))).collect::<Result<_>>()?);
    }
    let base_expanded: Vec<(Lexicon, BuildReport)> =
        seeds.iter().map(|s| expand(&base, &table, s).map_err(|e| expand_error(cfg, e))).collect::<Result<_>>()?;
    let phrases = phrase_set(expanded.iter().flatten().chain(&base_expanded).map(|(l, _)| l));
    let counts = load_counts(cfg, &mut rec, &phrases)?;
    let ctx = Context {
        cfg,
        indicators: &indicators,
        mapping: load_mappings(cfg, &mut rec)?,
    };

    let mut expansion = Vec::new();
    for si in 0..seeds.len() {
        for ((lc, thr), lexica) in grid.iter().zip(&expanded) {
            let (lex, report) = &lexica[si];
            let pruned = prune(lc, lex, &counts, &mut report.clone()).map_err(|e| prune_error(lex.construct(), e))?;
            expansion.push(ctx.evaluate(&pruned, &counts, thr.clone())?);
        }
    }
    let mut purification = Vec::new();
    for (lex, report) in &base_expanded {
        for &theta in &cfg.ablate.purification_grid {
            let lc = LexiconConfig { theta, ..base.clone() };
            let pruned = prune(&lc, lex, &counts, &mut report.clone()).map_err(|e| prune_error(lex.construct(), e))?;
            purification.push(ctx.evaluate(&pruned, &counts, vec![theta])?);
        }
    }
    write_table(cfg, "ablation_expansion.csv", &["concept_threshold", "synonym_threshold"], &indicators.names, &expansion)?;
    write_table(cfg, "ablation_purification.csv", &["purification_threshold"], &indicators.names, &purification)?;
    rec.output("ablation_expansion.csv");
    rec.output("ablation_purification.csv");
    rec.detail("concept_grid", &cfg.ablate.concept_grid);
    rec.detail("synonym_grid", &cfg.ablate.synonym_grid);
    rec.detail("purification_grid", &cfg.ablate.purification_grid);
    let manifest = rec.finish(cfg)?;
    Ok(AblateOutput {
        expansion,
        purification,
        manifest,
    })
}

use kgl_core::lexicon::{expand, prune, BuildReport, RemovalReason};
use kgl_core::Lexicon;

use super::{expand_error, lexicon_file, prune_error, load_counts, load_embeddings, load_seeds, phrase_set};
use crate::config::RunConfig;
use crate::error::Result;
use crate::io;
use crate::manifest::{Manifest, Recorder};

pub struct BuildOutput {
    pub lexica: Vec<Lexicon>,
    pub reports: Vec<BuildReport>,
    pub manifest: Manifest,
}

fn stage_rows(r: &BuildReport) -> Vec<Vec<String>> {
    [
        ("seeds", r.n_seeds),
        ("synonym_expansion", r.n_synonym),
        ("concept_expansion", r.n_concept),
        ("merged", r.n_merged),
        ("after_frequency", r.n_after_frequency),
        ("after_purification", r.n_after_purification),
    ]
    .into_iter()
    .map(|(s, n)| vec![r.construct.clone(), s.to_string(), n.to_string()])
    .collect()
}

fn removal_rows(r: &BuildReport) -> Vec<Vec<String>> {
    r.removals
        .iter()
        .map(|m| {
            let (stage, stat) = match &m.reason {
                RemovalReason::LowCorrelation { r } => ("purification", io::fmt_opt(*r)),
                RemovalReason::EmbeddingRank { .. } => ("embedding_rank", String::new()),
                _ => ("frequency", String::new()),
            };
            vec![r.construct.clone(), m.word.clone(), stage.to_string(), m.reason.to_string(), stat]
        })
        .collect()
}

/// Expands every construct's seeds, counts the corpus once (with all candidate
/// phrases), prunes, and writes one lexicon CSV per construct.
pub fn run(cfg: &RunConfig, only: Option<&str>) -> Result<BuildOutput> {
    let mut rec = Recorder::new("build");
    let lex_cfg = cfg.lexicon_config()?;
    let seeds = load_seeds(cfg, &mut rec, only)?;
    let table = load_embeddings(cfg, &mut rec)?;
    let mut expanded = Vec::new();
    for s in &seeds {
        let (mut lex, report) = expand(&lex_cfg, &table, s).map_err(|e| expand_error(cfg, e))?;
        lex.provenance.embedding_digest = cfg.paths.embeddings.as_ref().and_then(|p| rec.digest_of(p));
        expanded.push((lex, report));
    }
    let phrases = phrase_set(expanded.iter().map(|(l, _)| l));
    let counts = load_counts(cfg, &mut rec, &phrases)?;
    let mut lexica = Vec::new();
    let mut reports = Vec::new();
    let (mut stages, mut removals) = (Vec::new(), Vec::new());
    for (lex, mut report) in expanded {
        let pruned = prune(&lex_cfg, &lex, &counts, &mut report).map_err(|e| prune_error(lex.construct(), e))?;
        if report.stopped_at_floor {
            log::warn!("{}: purification stopped at the two-word floor", lex.construct());
        }
        let name = lexicon_file(pruned.construct());
        io::tables::write_lexicon(&cfg.output(&name), &pruned)?;
        rec.output(&name);
        stages.extend(stage_rows(&report));
        removals.extend(removal_rows(&report));
        lexica.push(pruned);
        reports.push(report);
    }
    let header = |h: &[&str]| h.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    io::tables::write_rows(&cfg.output("build_stages.csv"), &header(&["construct", "stage", "count"]), &stages)?;
    io::tables::write_rows(
        &cfg.output("removals.csv"),
        &header(&["construct", "word", "stage", "reason", "statistic"]),
        &removals,
    )?;
    rec.output("build_stages.csv");
    rec.output("removals.csv");
    rec.detail("constructs", lexica.iter().map(|l| l.construct().to_string()).collect::<Vec<_>>());
    rec.detail(
        "skipped_seeds",
        reports.iter().flat_map(|r| r.skipped_seeds.iter().map(|(s, e)| format!("{}: {s}: {e}", r.construct))).collect::<Vec<_>>(),
    );
    rec.detail("stopped_at_floor", reports.iter().filter(|r| r.stopped_at_floor).map(|r| r.construct.clone()).collect::<Vec<_>>());
    let manifest = rec.finish(cfg)?;
    Ok(BuildOutput {
        lexica,
        reports,
        manifest,
    })
}

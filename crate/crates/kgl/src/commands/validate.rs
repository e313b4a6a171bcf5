use std::collections::BTreeMap;

use kgl_core::stats::{align3, best_subset, indicator_map, validate_scores, BootstrapPlan, IndicatorTable, SubsetSearch, ValidationRow};
use kgl_core::{CorrelationResult, ScoreTable};
use rayon::prelude::*;

use super::score::{finish_table, STATE_SCORES};
use super::{build_lexica, load_embeddings, load_mappings, load_seeds, score, to_state};
use crate::config::RunConfig;
use crate::error::{KglError, Result};
use crate::io;
use crate::manifest::{Manifest, Recorder};

pub const MAIN_METHOD: &str = "kgl";
pub const SEEDS_ONLY: &str = "seeds-only";

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapRow {
    pub method_a: String,
    pub method_b: String,
    pub construct: String,
    pub indicator: String,
    pub n: usize,
    pub delta_r: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub significant: bool,
    pub redraws: u64,
}

pub struct ValidateOutput {
    /// Method name to one row per construct.
    pub methods: BTreeMap<String, Vec<ValidationRow>>,
    pub bootstrap: Vec<BootstrapRow>,
    pub subsets: Option<SubsetSearch>,
    pub manifest: Manifest,
}

/// `0.380*` style cell; empty when undefined.
pub fn format_cell(c: Option<&CorrelationResult>, alpha: f64) -> String {
    match c {
        Some(c) => format!("{:.3}{}", c.r, if c.significant(alpha) { "*" } else { "" }),
        None => String::new(),
    }
}

fn kgl_scores(cfg: &RunConfig, rec: &mut Recorder) -> Result<ScoreTable> {
    match &cfg.paths.scores {
        Some(p) => {
            let full = cfg.require("scores", &cfg.paths.scores)?;
            rec.input(cfg, p)?;
            io::tables::read_scores(&full)
        }
        None => {
            let path = cfg.output(STATE_SCORES);
            if !path.exists() {
                return Err(KglError::input(&path, "state scores not found; run score first or set paths.scores"));
            }
            rec.detail("kgl_scores_sha256", crate::manifest::sha256_file(&path)?);
            io::tables::read_scores(&path)
        }
    }
}

/// Rebuilds lexica with seeds only (no expansion) and scores them per state.
fn seeds_only_scores(cfg: &RunConfig, rec: &mut Recorder) -> Result<ScoreTable> {
    let lex_cfg = cfg.lexicon_config()?.seeds_only();
    let seeds = load_seeds(cfg, rec, None)?;
    let table = load_embeddings(cfg, rec)?;
    let (lexica, counts) = build_lexica(cfg, rec, &lex_cfg, &seeds, &table)?;
    let mode = cfg.normalization()?;
    let mut raw = ScoreTable::default();
    for lex in &lexica {
        raw.extend(score(lex, &counts, mode));
    }
    rec.detail("seeds_only_sizes", lexica.iter().map(|l| (l.construct().to_string(), l.len())).collect::<BTreeMap<_, _>>());
    let mapping = load_mappings(cfg, rec)?;
    finish_table(cfg, &to_state(cfg, &raw, mapping.as_ref())?)
}

/// Correlates every construct (except `diff`) with every indicator column.
pub fn validate_method(cfg: &RunConfig, scores: &ScoreTable, indicators: &IndicatorTable) -> Result<Vec<ValidationRow>> {
    let mut rows = Vec::new();
    for c in scores.constructs().into_iter().filter(|c| c != "diff") {
        let primary = cfg.validate.primary_for(&c);
        let mut r = validate_scores(&scores.construct(&c), indicators, &primary).map_err(|e| KglError::numeric(format!("{c}: {e}")))?;
        rows.append(&mut r);
    }
    Ok(rows)
}

fn bootstrap_pair(
    cfg: &RunConfig,
    a: (&str, &ScoreTable),
    b: (&str, &ScoreTable),
    indicators: &IndicatorTable,
) -> Result<Vec<BootstrapRow>> {
    let boot = cfg.bootstrap_config();
    let mut out = Vec::new();
    let b_constructs = b.1.constructs();
    for c in a.1.constructs().into_iter().filter(|c| c != "diff" && b_constructs.contains(c)) {
        let (sa, sb) = (a.1.score_map(&c), b.1.score_map(&c));
        for name in &indicators.names {
            let ind = indicator_map(indicators, name).expect("listed column");
            let (xa, xb, y) = align3(&sa, &sb, &ind);
            let plan = match BootstrapPlan::new(&xa, &xb, &y, boot) {
                Ok(p) => p,
                Err(e) => {
                    log::warn!("bootstrap {}/{} {c} {name} skipped: {e}", a.0, b.0);
                    continue;
                }
            };
            let reps = (0..boot.n_boot)
                .into_par_iter()
                .map(|i| plan.replicate(i))
                .collect::<core::result::Result<Vec<_>, _>>()
                .and_then(|reps| plan.finish(&reps))
                .map_err(|e| KglError::numeric(format!("bootstrap {c} {name}: {e}")))?;
            out.push(BootstrapRow {
                method_a: a.0.to_string(),
                method_b: b.0.to_string(),
                construct: c.clone(),
                indicator: name.clone(),
                n: y.len(),
                delta_r: reps.delta_r,
                ci_low: reps.ci_low,
                ci_high: reps.ci_high,
                significant: reps.significant,
                redraws: reps.redraws,
            });
        }
    }
    Ok(out)
}

fn report_rows(cfg: &RunConfig, methods: &BTreeMap<String, Vec<ValidationRow>>, names: &[String]) -> (Vec<String>, Vec<Vec<String>>, Vec<Vec<String>>) {
    let mut header = vec!["method".to_string(), "construct".to_string()];
    header.extend(names.iter().cloned());
    header.push("average_validity".into());
    let (mut wide, mut long) = (Vec::new(), Vec::new());
    let alpha = cfg.validate.alpha;
    for (m, rows) in methods {
        for row in rows {
            let mut line = vec![m.clone(), row.construct.clone()];
            for (name, cell) in &row.cells {
                line.push(format_cell(cell.as_ref(), alpha));
                long.push(vec![
                    m.clone(),
                    row.construct.clone(),
                    name.clone(),
                    io::fmt_opt(cell.map(|c| c.r)),
                    io::fmt_opt(cell.map(|c| c.p)),
                    cell.map_or(String::new(), |c| c.n.to_string()),
                    cell.map_or(String::new(), |c| c.significant(alpha).to_string()),
                ]);
            }
            line.push(row.average_validity.map_or(String::new(), |v| format!("{v:.3}")));
            wide.push(line);
        }
    }
    (header, wide, long)
}

/// Validates the main scores, any configured extra methods and (optionally)
/// a seeds-only baseline against the indicator table.
pub fn run(cfg: &RunConfig) -> Result<ValidateOutput> {
    let mut rec = Recorder::new("validate");
    let ind_path = cfg.require("indicators", &cfg.paths.indicators)?;
    rec.input(cfg, cfg.paths.indicators.as_ref().expect("required"))?;
    let indicators = io::tables::read_indicators(&ind_path)?;

    let mut scores: BTreeMap<String, ScoreTable> = BTreeMap::new();
    scores.insert(MAIN_METHOD.into(), kgl_scores(cfg, &mut rec)?);
    let mapping = load_mappings(cfg, &mut rec)?;
    for (name, p) in &cfg.validate.methods {
        let full = cfg.require(&format!("validate.methods.{name}"), &Some(p.clone()))?;
        rec.input(cfg, p)?;
        let t = io::tables::read_scores(&full)?;
        let t = if t.rows.iter().any(|r| r.region.is_county()) { to_state(cfg, &t, mapping.as_ref())? } else { t };
        scores.insert(name.clone(), t);
    }
    if cfg.validate.seed_baseline {
        scores.insert(SEEDS_ONLY.into(), seeds_only_scores(cfg, &mut rec)?);
    }

    let mut methods = BTreeMap::new();
    for (name, table) in &scores {
        methods.insert(name.clone(), validate_method(cfg, table, &indicators)?);
    }
    let (header, wide, long) = report_rows(cfg, &methods, &indicators.names);
    io::tables::write_rows(&cfg.output("validation_report.csv"), &header, &wide)?;
    let long_header: Vec<String> = ["method", "construct", "indicator", "r", "p", "n", "significant"].iter().map(|s| s.to_string()).collect();
    io::tables::write_rows(&cfg.output("validation_long.csv"), &long_header, &long)?;
    rec.output("validation_report.csv");
    rec.output("validation_long.csv");

    let mut bootstrap = Vec::new();
    for [a, b] in &cfg.validate.compare {
        match (scores.get(a), scores.get(b)) {
            (Some(ta), Some(tb)) => bootstrap.extend(bootstrap_pair(cfg, (a, ta), (b, tb), &indicators)?),
            _ => log::warn!("comparison {a} vs {b} skipped: method not available"),
        }
    }
    if !cfg.validate.compare.is_empty() {
        let header: Vec<String> = ["method_a", "method_b", "construct", "indicator", "n", "delta_r", "ci_low", "ci_high", "significant", "redraws"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let rows: Vec<Vec<String>> = bootstrap
            .iter()
            .map(|b| {
                vec![
                    b.method_a.clone(),
                    b.method_b.clone(),
                    b.construct.clone(),
                    b.indicator.clone(),
                    b.n.to_string(),
                    io::fmt_f64(b.delta_r),
                    io::fmt_f64(b.ci_low),
                    io::fmt_f64(b.ci_high),
                    b.significant.to_string(),
                    b.redraws.to_string(),
                ]
            })
            .collect();
        io::tables::write_rows(&cfg.output("bootstrap.csv"), &header, &rows)?;
        rec.output("bootstrap.csv");
    }

    let subsets = if indicators.names.len() >= cfg.validate.subset_min_size.max(2) {
        match best_subset(&indicators, cfg.validate.subset_min_size) {
            Ok(s) => {
                let header: Vec<String> = ["columns", "size", "n_units", "alpha", "best"].iter().map(|s| s.to_string()).collect();
                let best = s.best.as_ref().map(|b| b.0.clone());
                let rows: Vec<Vec<String>> = s
                    .candidates
                    .iter()
                    .map(|c| {
                        vec![
                            c.columns.join(";"),
                            c.columns.len().to_string(),
                            c.n_units.to_string(),
                            io::fmt_opt(c.alpha),
                            (best.as_ref() == Some(&c.columns)).to_string(),
                        ]
                    })
                    .collect();
                io::tables::write_rows(&cfg.output("subset_search.csv"), &header, &rows)?;
                rec.output("subset_search.csv");
                rec.detail("best_subset", &s.best);
                Some(s)
            }
            Err(e) => {
                log::warn!("subset search skipped: {e}");
                None
            }
        }
    } else {
        None
    };

    rec.detail("alpha", cfg.validate.alpha);
    rec.detail("bootstrap", serde_json::json!({"n_boot": cfg.bootstrap.n_boot, "seed": cfg.bootstrap.seed, "level": cfg.bootstrap.level}));
    rec.detail(
        "average_validity",
        methods
            .iter()
            .map(|(m, rows)| (m.clone(), rows.iter().map(|r| (r.construct.clone(), r.average_validity)).collect::<BTreeMap<_, _>>()))
            .collect::<BTreeMap<_, _>>(),
    );
    let manifest = rec.finish(cfg)?;
    Ok(ValidateOutput {
        methods,
        bootstrap,
        subsets,
        manifest,
    })
}

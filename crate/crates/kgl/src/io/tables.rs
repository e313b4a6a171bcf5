//! Seed files and the small CSV tables: lexica, scores, indicators, mappings,
//! communities, interpolation features and outputs.

use std::collections::BTreeMap;
use std::path::Path;

use kgl_core::gp::{FeatureRow, GapReason, InterpolatedRow, SOCIO_COLUMNS};
use kgl_core::scoring::{Community, CommunityRow};
use kgl_core::stats::IndicatorTable;
use kgl_core::{Lexicon, LexiconEntry, Origin, RegionId, ScoreRow, ScoreTable, SeedSet};

use super::{csv_err, csv_reader, csv_writer, finish, fmt_f64, fmt_opt, parse_cell};
use crate::error::{KglError, Result};

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn expect_header(path: &Path, rdr: &mut csv::Reader<std::fs::File>, expected: &[&str]) -> Result<()> {
    let h = rdr.headers().map_err(|e| csv_err(path, e))?;
    let got: Vec<&str> = h.iter().collect();
    if got != expected {
        return Err(KglError::input(
            path,
            format!("header {got:?}, expected {}", expected.join(",")),
        ));
    }
    Ok(())
}

fn region(path: &Path, line: u64, code: &str) -> Result<RegionId> {
    RegionId::parse(code).map_err(|e| KglError::input(path, format!("line {line}: {e}")))
}

fn number(path: &Path, line: u64, cell: &str) -> Result<Option<f64>> {
    parse_cell(cell).map_err(|e| KglError::input(path, format!("line {line}: {e}")))
}

// ---- seeds ----

/// Seed file: first line `construct:<name>`, then one entry per line.
/// Blank lines and `#` comments are ignored.
pub fn read_seeds(path: &Path) -> Result<SeedSet> {
    let text = super::read_to_string(path)?;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let first = lines.next().ok_or_else(|| KglError::input(path, "empty seed file"))?;
    let construct = first
        .strip_prefix("construct:")
        .map(str::trim)
        .ok_or_else(|| KglError::input(path, "first line must be construct:<name>"))?;
    SeedSet::new(construct, lines).map_err(|e| KglError::input(path, e))
}

pub fn write_seeds(path: &Path, construct: &str, entries: &[String]) -> Result<()> {
    let mut text = format!("construct:{construct}\n");
    for e in entries {
        text.push_str(e);
        text.push('\n');
    }
    super::write_text(path, &text)
}

// ---- lexicon ----

pub fn write_lexicon(path: &Path, lex: &Lexicon) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["word", "weight", "origin", "source"]).map_err(|e| csv_err(path, e))?;
    for e in lex.sorted() {
        w.write_record([e.word.as_str(), &fmt_f64(e.weight), e.origin.as_str(), e.source.as_str()])
            .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn read_lexicon(path: &Path, construct: &str) -> Result<Lexicon> {
    let mut rdr = csv_reader(path)?;
    expect_header(path, &mut rdr, &["word", "weight", "origin", "source"])?;
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = line_of(&rec);
        let weight = number(path, line, &rec[1])?.ok_or_else(|| KglError::input(path, format!("line {line}: missing weight")))?;
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(KglError::input(path, format!("line {line}: weight {weight} outside (0, 1]")));
        }
        let origin = Origin::parse(&rec[2]).ok_or_else(|| KglError::input(path, format!("line {line}: unknown origin {:?}", &rec[2])))?;
        entries.push(LexiconEntry {
            word: rec[0].to_string(),
            weight,
            origin,
            source: rec[3].to_string(),
        });
    }
    Ok(Lexicon::from_entries(construct, entries))
}

// ---- scores ----

pub const SCORE_HEADER: [&str; 5] = ["region_id", "construct", "score", "score_norm", "n_docs"];

pub fn write_scores(path: &Path, scores: &ScoreTable) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SCORE_HEADER).map_err(|e| csv_err(path, e))?;
    for r in &scores.rows {
        w.write_record([
            r.region.as_str(),
            r.construct.as_str(),
            &fmt_f64(r.score),
            &fmt_opt(r.score_norm),
            &r.n_docs.map(|d| d.to_string()).unwrap_or_default(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn read_scores(path: &Path) -> Result<ScoreTable> {
    let mut rdr = csv_reader(path)?;
    expect_header(path, &mut rdr, &SCORE_HEADER)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = line_of(&rec);
        let n_docs = match rec[4].trim() {
            "" => None,
            s => Some(s.parse().map_err(|_| KglError::input(path, format!("line {line}: bad n_docs {s:?}")))?),
        };
        rows.push(ScoreRow {
            region: region(path, line, &rec[0])?,
            construct: rec[1].to_string(),
            score: number(path, line, &rec[2])?.ok_or_else(|| KglError::input(path, format!("line {line}: missing score")))?,
            score_norm: number(path, line, &rec[3])?,
            n_docs,
        });
    }
    Ok(ScoreTable::new(rows))
}

/// Ground-truth table `region_id,construct,score` emitted by the synthetic generator.
pub fn write_truth(path: &Path, truth: &BTreeMap<String, BTreeMap<RegionId, f64>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["region_id", "construct", "score"]).map_err(|e| csv_err(path, e))?;
    for (construct, m) in truth {
        for (r, v) in m {
            w.write_record([r.as_str(), construct, &fmt_f64(*v)]).map_err(|e| csv_err(path, e))?;
        }
    }
    finish(path, w)
}

pub fn read_truth(path: &Path) -> Result<BTreeMap<String, BTreeMap<RegionId, f64>>> {
    let mut rdr = csv_reader(path)?;
    expect_header(path, &mut rdr, &["region_id", "construct", "score"])?;
    let mut out: BTreeMap<String, BTreeMap<RegionId, f64>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = line_of(&rec);
        let v = number(path, line, &rec[2])?.ok_or_else(|| KglError::input(path, format!("line {line}: missing score")))?;
        out.entry(rec[1].to_string()).or_default().insert(region(path, line, &rec[0])?, v);
    }
    Ok(out)
}

// ---- indicators ----

/// `state,<indicator...>` with empty cells for missing values.
pub fn read_indicators(path: &Path) -> Result<IndicatorTable> {
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.get(0) != Some("state") || headers.len() < 2 {
        return Err(KglError::input(path, "header must be state,<indicator>,..."));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut table = IndicatorTable {
        units: Vec::new(),
        columns: vec![Vec::new(); names.len()],
        names,
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = line_of(&rec);
        let unit = region(path, line, &rec[0])?;
        if table.units.contains(&unit) {
            return Err(KglError::input(path, format!("line {line}: duplicate unit {unit}")));
        }
        table.units.push(unit);
        for (j, col) in table.columns.iter_mut().enumerate() {
            col.push(number(path, line, rec.get(j + 1).unwrap_or(""))?);
        }
    }
    Ok(table)
}

pub fn write_indicators(path: &Path, table: &IndicatorTable) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["state".to_string()];
    header.extend(table.names.iter().cloned());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (i, u) in table.units.iter().enumerate() {
        let mut row = vec![u.to_string()];
        row.extend(table.columns.iter().map(|c| fmt_opt(c[i])));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

// ---- mappings and communities ----

/// County to state mapping `fips,code`.
pub fn read_mappings(path: &Path) -> Result<BTreeMap<RegionId, RegionId>> {
    let mut rdr = csv_reader(path)?;
    expect_header(path, &mut rdr, &["fips", "code"])?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = line_of(&rec);
        let county = region(path, line, &rec[0])?;
        let state = region(path, line, &rec[1])?;
        if out.insert(county.clone(), state).is_some() {
            return Err(KglError::input(path, format!("line {line}: duplicate county {county}")));
        }
    }
    Ok(out)
}

pub fn write_mappings(path: &Path, mapping: &[(RegionId, RegionId)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["fips", "code"]).map_err(|e| csv_err(path, e))?;
    for (c, s) in mapping {
        w.write_record([c.as_str(), s.as_str()]).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// County community labels `fips,community`.
pub fn read_communities(path: &Path) -> Result<BTreeMap<RegionId, Community>> {
    let mut rdr = csv_reader(path)?;
    expect_header(path, &mut rdr, &["fips", "community"])?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = line_of(&rec);
        let c = Community::parse(&rec[1]).map_err(|e| KglError::input(path, format!("line {line}: {e}")))?;
        out.insert(region(path, line, &rec[0])?, c);
    }
    Ok(out)
}

pub fn write_community_summary(path: &Path, rows: &[CommunityRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["community", "mean_indiv", "mean_coll", "n_counties"])
        .map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.community.label(),
            &fmt_f64(r.mean_individualism),
            &fmt_f64(r.mean_collectivism),
            &r.n_counties.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

// ---- interpolation ----

pub fn feature_header() -> Vec<&'static str> {
    let mut h = vec!["fips", "lat", "lon"];
    h.extend(SOCIO_COLUMNS);
    h
}

/// Feature rows; missing cells become `NaN`, present cells are range-checked.
pub fn read_features(path: &Path) -> Result<Vec<FeatureRow>> {
    let mut rdr = csv_reader(path)?;
    expect_header(path, &mut rdr, &feature_header())?;
    let mut out = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = line_of(&rec);
        let cell = |j: usize| -> Result<f64> { Ok(number(path, line, rec.get(j).unwrap_or(""))?.unwrap_or(f64::NAN)) };
        let mut socio = [f64::NAN; 11];
        for (k, s) in socio.iter_mut().enumerate() {
            *s = cell(k + 3)?;
        }
        let row = FeatureRow {
            region: region(path, line, &rec[0])?,
            lat: cell(1)?,
            lon: cell(2)?,
            socio,
        };
        row.validate().map_err(|e| KglError::input(path, format!("line {line}: {e}")))?;
        if !seen.insert(row.region.clone()) {
            return Err(KglError::input(path, format!("line {line}: duplicate fips {}", row.region)));
        }
        out.push(row);
    }
    Ok(out)
}

pub fn write_features(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(feature_header()).map_err(|e| csv_err(path, e))?;
    for r in rows {
        let mut rec = vec![r.region.to_string()];
        rec.extend(r.values().into_iter().map(|v| if v.is_finite() { fmt_f64(v) } else { String::new() }));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn write_interpolation(path: &Path, rows: &[InterpolatedRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["fips", "score", "variance", "source"]).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([r.region.as_str(), &fmt_f64(r.score), &fmt_opt(r.variance), r.source.as_str()])
            .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn write_gaps(path: &Path, gaps: &[(RegionId, GapReason)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["fips", "reason"]).map_err(|e| csv_err(path, e))?;
    for (r, g) in gaps {
        w.write_record([r.as_str(), g.as_str()]).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Writes rows of already formatted cells under `header`.
pub fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}


//! Document TSV ingestion (sharded, parallel) and precomputed count tables.

use std::io::Write;
use std::path::Path;

use kgl_core::corpus::{CountMode, PhraseSet, RegionCounts};
use kgl_core::{Document, RegionId};
use rayon::prelude::*;

use crate::error::{KglError, Result};

/// A rejected input line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedLine {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub counts: RegionCounts,
    pub rejected: Vec<RejectedLine>,
    pub documents: u64,
}

/// Splits `text` into at most `shards` newline-aligned chunks with their 1-based first line.
fn split_shards(text: &str, shards: usize) -> Vec<(usize, &str)> {
    let shards = shards.max(1);
    let bytes = text.as_bytes();
    let target = bytes.len().div_ceil(shards).max(1);
    let mut bounds = vec![0usize];
    let mut pos = 0;
    while pos < bytes.len() {
        let mut end = (pos + target).min(bytes.len());
        while end < bytes.len() && bytes[end - 1] != b'\n' {
            end += 1;
        }
        bounds.push(end);
        pos = end;
    }
    let pieces: Vec<&str> = bounds.windows(2).map(|w| &text[w[0]..w[1]]).collect();
    let newlines: Vec<usize> = pieces.par_iter().map(|p| p.bytes().filter(|&b| b == b'\n').count()).collect();
    let mut line = 1;
    pieces
        .into_iter()
        .zip(newlines)
        .map(|(p, n)| {
            let start = line;
            line += n;
            (start, p)
        })
        .collect()
}

fn ingest_shard(first_line: usize, text: &str, phrases: &PhraseSet) -> (RegionCounts, Vec<RejectedLine>, u64) {
    let mut counts = RegionCounts::new(CountMode::Counts);
    let mut rejected = Vec::new();
    let mut buf = Vec::new();
    let mut docs = 0;
    let mut cached: Option<(String, RegionId)> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = first_line + i;
        if raw.trim().is_empty() {
            continue;
        }
        let Some((code, body)) = raw.split_once('\t') else {
            rejected.push(RejectedLine {
                line,
                reason: "missing tab separator".into(),
            });
            continue;
        };
        let code = code.trim();
        let region = match &cached {
            Some((c, r)) if c == code => r.clone(),
            _ => match RegionId::parse(code) {
                Ok(r) => {
                    cached = Some((code.to_string(), r.clone()));
                    r
                }
                Err(e) => {
                    rejected.push(RejectedLine {
                        line,
                        reason: e.to_string(),
                    });
                    continue;
                }
            },
        };
        counts.add_text_with(&region, body, phrases, &mut buf);
        docs += 1;
    }
    (counts, rejected, docs)
}

/// Counts a `region_id<TAB>text` corpus held in memory using `shards` parallel shards.
///
/// Shard results are merged in file order; count merging is exact, so the
/// result does not depend on the shard count or thread schedule.
pub fn ingest_text(text: &str, phrases: &PhraseSet, shards: usize) -> Ingested {
    let parts = split_shards(text, shards);
    let results: Vec<_> = parts.par_iter().map(|(l, t)| ingest_shard(*l, t, phrases)).collect();
    let mut counts = RegionCounts::new(CountMode::Counts);
    let mut rejected = Vec::new();
    let mut documents = 0;
    for (c, r, d) in results {
        counts.merge(c).expect("count-mode shards always merge");
        rejected.extend(r);
        documents += d;
    }
    Ingested {
        counts,
        rejected,
        documents,
    }
}

pub fn ingest_documents(path: &Path, phrases: &PhraseSet, shards: usize) -> Result<Ingested> {
    let text = super::read_to_string(path)?;
    Ok(ingest_text(&text, phrases, shards))
}

/// Shard count used when none is configured: a few shards per worker thread.
pub fn default_shards() -> usize {
    rayon::current_num_threads() * 4
}

pub fn write_documents(path: &Path, docs: &[Document]) -> Result<()> {
    let mut w = super::create(path)?;
    for d in docs {
        writeln!(w, "{}\t{}", d.region, d.text).map_err(|e| KglError::io(path, e))?;
    }
    w.flush().map_err(|e| KglError::io(path, e))
}

/// Error report CSV `line_number,reason`.
pub fn write_rejected(path: &Path, rejected: &[RejectedLine]) -> Result<()> {
    let mut w = super::csv_writer(path)?;
    w.write_record(["line_number", "reason"]).map_err(|e| super::csv_err(path, e))?;
    for r in rejected {
        w.write_record([r.line.to_string(), r.reason.clone()])
            .map_err(|e| super::csv_err(path, e))?;
    }
    super::finish(path, w)
}

/// Loads `region_id,word,count` or `region_id,word,freq`.
pub fn load_region_counts(path: &Path) -> Result<RegionCounts> {
    let mut rdr = super::csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| super::csv_err(path, e))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let mode = match cols.as_slice() {
        ["region_id", "word", "count"] => CountMode::Counts,
        ["region_id", "word", "freq"] => CountMode::Frequencies,
        _ => {
            return Err(KglError::input(
                path,
                format!("unknown header {cols:?}; expected region_id,word,count or region_id,word,freq"),
            ))
        }
    };
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| super::csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let region = RegionId::parse(&rec[0]).map_err(|e| KglError::input(path, format!("line {line}: {e}")))?;
        let value: f64 = rec[2]
            .parse()
            .map_err(|_| KglError::input(path, format!("line {line}: bad value {:?}", &rec[2])))?;
        records.push((region, rec[1].to_string(), value, line));
    }
    RegionCounts::from_records(mode, records).map_err(|e| KglError::input(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shards_cover_every_line_once() {
        let text = "01001\ta b\n01001\tc\n\n02001\td e f\nbad\tx\n01003\tg";
        for shards in 1..8 {
            let parts = split_shards(text, shards);
            let joined: String = parts.iter().map(|(_, t)| *t).collect();
            assert_eq!(joined, text);
            let got = ingest_text(text, &PhraseSet::default(), shards);
            assert_eq!(got.documents, 4);
            assert_eq!(
                got.rejected,
                vec![RejectedLine {
                    line: 5,
                    reason: RegionId::parse("bad").unwrap_err().to_string()
                }]
            );
            assert_eq!(got.counts, ingest_text(text, &PhraseSet::default(), 1).counts);
        }
    }
}

//! Whitespace-separated text embeddings (`token v1 ... vd`), with or without
//! a leading `count dim` header line.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use kgl_core::embedding::TableBuilder;
use kgl_core::EmbeddingTable;

use crate::error::{KglError, Result};

fn header(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split_ascii_whitespace();
    let (a, b) = (it.next()?, it.next()?);
    if it.next().is_some() {
        return None;
    }
    Some((a.parse().ok()?, b.parse().ok()?))
}

/// Loads an embedding file. Row order defines frequency rank.
pub fn read_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let reader = BufReader::with_capacity(1 << 20, super::open(path)?);
    let mut builder: Option<TableBuilder> = None;
    let mut declared: Option<usize> = None;
    let mut values: Vec<f64> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| KglError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if lineno == 1 {
            if let Some((count, dim)) = header(&line) {
                declared = Some(count);
                builder = Some(TableBuilder::with_capacity(Some(dim), count).map_err(|e| KglError::input(path, e))?);
                continue;
            }
        }
        let mut parts = line.split_ascii_whitespace();
        let token = parts.next().unwrap_or_default();
        values.clear();
        for p in parts {
            let v: f64 = p
                .parse()
                .map_err(|_| KglError::input(path, format!("line {lineno}: bad value {p:?}")))?;
            values.push(v);
        }
        let b = match builder.as_mut() {
            Some(b) => b,
            None => builder.insert(TableBuilder::new(None).map_err(|e| KglError::input(path, e))?),
        };
        b.push(token, &values, lineno).map_err(|e| KglError::input(path, e))?;
    }
    let table = builder
        .ok_or_else(|| KglError::input(path, "no embedding rows"))?
        .finish()
        .map_err(|e| KglError::input(path, e))?;
    if let Some(n) = declared {
        if n != table.len() {
            log::warn!("{}: header declares {n} rows, found {}", path.display(), table.len());
        }
    }
    Ok(table)
}

/// Writes rows as `token v1 ... vd` without a header.
pub fn write_embeddings(path: &Path, rows: &[(String, Vec<f64>)]) -> Result<()> {
    let mut w = super::create(path)?;
    let mut line = String::new();
    for (token, v) in rows {
        line.clear();
        line.push_str(token);
        for x in v {
            line.push(' ');
            line.push_str(&super::fmt_f64(*x));
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| KglError::io(path, e))?;
    }
    w.flush().map_err(|e| KglError::io(path, e))
}

//! Readers and writers for every on-disk format.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a value
//! read back is bit-identical to the one written and repeated runs produce
//! identical bytes.

pub mod corpus;
pub mod embeddings;
pub mod tables;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{KglError, Result};

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| KglError::io(path, e))
}

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| KglError::io(path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| KglError::io(dir, e))?;
        }
    }
    File::create(path).map(BufWriter::new).map_err(|e| KglError::io(path, e))
}

/// Writes a whole text file at once.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| KglError::io(path, e))?;
    w.flush().map_err(|e| KglError::io(path, e))
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(create(path)?))
}

pub(crate) fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?))
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> KglError {
    match e.kind() {
        csv::ErrorKind::Io(_) => KglError::io(path, std::io::Error::other(e.to_string())),
        _ => KglError::input(path, e),
    }
}

pub(crate) fn finish<W: Write>(path: &Path, mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| KglError::io(path, e))
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Parses a numeric cell; empty, `NA` and `NaN` mean missing.
pub(crate) fn parse_cell(cell: &str) -> std::result::Result<Option<f64>, String> {
    let t = cell.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(format!("not a finite number: {t:?}")),
    }
}

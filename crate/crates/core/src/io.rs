//! Plain numeric CSV matrices and pretty-printed JSON.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Whether a leading non-numeric row is accepted as a header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Header {
    Forbidden,
    Optional,
}

fn parse_err(line: u64, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Reads a dense numeric matrix. Every row must have the same number of
/// fields and every field must parse as a finite number; errors carry the
/// 1-based line number.
pub fn read_matrix_csv(reader: impl Read, header: Header) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0usize;
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(idx as u64 + 1, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if header == Header::Optional && rows == 0 && width.is_none() => {
                width = Some(rec.len());
                continue;
            }
            Err(e) => {
                let col = rec.iter().position(|f| f.parse::<f64>().is_err()).unwrap_or(0);
                return Err(parse_err(line, format!("field {} ({:?}): {e}", col + 1, &rec[col])));
            }
        };
        if let Some(col) = row.iter().position(|x| !x.is_finite()) {
            return Err(parse_err(line, format!("field {} is not finite", col + 1)));
        }
        match width {
            Some(w) if w != row.len() => {
                return Err(parse_err(line, format!("expected {w} fields, found {}", row.len())));
            }
            None => width = Some(row.len()),
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    if rows == 0 {
        return Err(parse_err(0, "no data rows"));
    }
    Ok(DMatrix::from_row_slice(rows, width.unwrap_or(0), &values))
}

pub fn read_matrix_file(path: &Path, header: Header) -> Result<DMatrix<f64>> {
    read_matrix_csv(File::open(path)?, header)
}

/// Writes `m` row-major with full round-trip precision and no header.
pub fn write_matrix_csv(writer: impl Write, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in m.row_iter() {
        w.write_record(row.iter().map(|x| format!("{x:?}")))
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix_file(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_matrix_csv(BufWriter::new(File::create(path)?), m)
}

pub fn write_json_file(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

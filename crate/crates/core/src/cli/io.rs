//! CSV and JSON files.
//!
//! Numbers are written with `{:.16e}`, i.e. 17 significant digits, which
//! round-trips every `f64` exactly.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use thiserror::Error;

use crate::diagnostics::DiagnosticsRecord;
use crate::grid::{GridSpec, ScalarField};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: io::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

impl IoError {
    fn file(path: &Path, source: io::Error) -> Self {
        IoError::File {
            path: path.display().to_string(),
            source,
        }
    }

    fn format(path: &Path, message: impl Into<String>) -> Self {
        IoError::Format {
            path: path.display().to_string(),
            message: message.into(),
        }
    }
}

#[inline]
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trajectory_header() -> String {
    DiagnosticsRecord::COLUMNS.join(",")
}

pub fn write_trajectory<W: Write>(mut w: W, records: &[DiagnosticsRecord]) -> io::Result<()> {
    writeln!(w, "{}", trajectory_header())?;
    for r in records {
        let row: Vec<String> = r.values().iter().map(|&x| fmt_f64(x)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()
}

pub fn trajectory_csv(records: &[DiagnosticsRecord]) -> String {
    let mut buf = Vec::new();
    write_trajectory(&mut buf, records).expect("writing to memory");
    String::from_utf8(buf).expect("ascii")
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
    }
    let f = File::create(path).map_err(|e| IoError::file(path, e))?;
    let mut w = BufWriter::new(f);
    w.write_all(contents)
        .and_then(|_| w.flush())
        .map_err(|e| IoError::file(path, e))
}

pub fn read_file(path: &Path) -> Result<String, IoError> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| IoError::file(path, e))?;
    Ok(s)
}

/// Parses a trajectory table; the header must match the fixed schema.
pub fn parse_trajectory(text: &str, path: &Path) -> Result<Vec<DiagnosticsRecord>, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| IoError::format(path, e.to_string()))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != DiagnosticsRecord::COLUMNS {
        return Err(IoError::format(path, format!("unexpected header {got:?}")));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| IoError::format(path, e.to_string()))?;
        let mut v = [0.0; 11];
        for (i, field) in rec.iter().enumerate().take(11) {
            v[i] = field.trim().parse().map_err(|_| {
                IoError::format(path, format!("row {}: bad number {field:?}", line + 2))
            })?;
        }
        if rec.len() != 11 {
            return Err(IoError::format(
                path,
                format!("row {} has {} fields", line + 2, rec.len()),
            ));
        }
        out.push(DiagnosticsRecord::from_values(v));
    }
    Ok(out)
}

pub fn read_trajectory(path: &Path) -> Result<Vec<DiagnosticsRecord>, IoError> {
    parse_trajectory(&read_file(path)?, path)
}

/// Field table with header `k,eta,re,im`, one row per lattice point in storage order.
pub fn field_csv(field: &ScalarField) -> String {
    let grid = field.grid();
    let mut s = String::from("k,eta,re,im\n");
    for (i, c) in field.coeffs().iter().enumerate() {
        let (k, j) = grid.point(i);
        s.push_str(&format!(
            "{k},{},{},{}\n",
            fmt_f64(grid.eta(j)),
            fmt_f64(c.re),
            fmt_f64(c.im)
        ));
    }
    s
}

/// Reads a field table written by [`field_csv`] onto `grid`.
pub fn read_field(path: &Path, grid: &GridSpec) -> Result<ScalarField, IoError> {
    let text = read_file(path)?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| IoError::format(path, e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["k", "eta", "re", "im"] {
        return Err(IoError::format(path, "expected header k,eta,re,im"));
    }
    let mut field = ScalarField::zeros(*grid);
    let mut seen = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| IoError::format(path, e.to_string()))?;
        let num = |i: usize| -> Result<f64, IoError> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| IoError::format(path, format!("bad row {rec:?}")))
        };
        let k = num(0)? as i64;
        let eta = num(1)?;
        let j = (eta / grid.delta_eta()).round() as i64;
        if (j as f64 * grid.delta_eta() - eta).abs() > 1e-9 * grid.delta_eta().max(eta.abs()) {
            return Err(IoError::format(
                path,
                format!("eta = {eta} is not on the lattice"),
            ));
        }
        let idx = grid.index(k, j).ok_or_else(|| {
            IoError::format(path, format!("(k, eta) = ({k}, {eta}) outside the grid"))
        })?;
        field.coeffs_mut()[idx] = Complex64::new(num(2)?, num(3)?);
        seen += 1;
    }
    if seen != grid.len() {
        return Err(IoError::format(
            path,
            format!("{seen} rows for {} lattice points", grid.len()),
        ));
    }
    Ok(field)
}

//! Two-column CSV input/output for sample series and estimates.
//!
//! Format: optional header line `t,y`, one record per line, decimal
//! floating point, comma separated, LF line endings. Values are written
//! with Rust's shortest round-trip formatting, so save/load is lossless.

use crate::error::{Error, Result};
use crate::grid::{SampleSeries, TimeGrid};
use std::fs;
use std::io::Write;
use std::path::Path;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn load_csv(path: &Path) -> Result<SampleSeries> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<SampleSeries> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if idx == 0 && line.chars().any(|c| c.is_alphabetic()) {
            continue; // header
        }
        let mut fields = line.split(',');
        let (Some(ts), Some(ys), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Csv {
                row,
                message: format!("expected two comma-separated fields, got '{line}'"),
            });
        };
        let t: f64 = ts.trim().parse().map_err(|_| Error::Csv {
            row,
            message: format!("non-numeric time field '{ts}'"),
        })?;
        let y: f64 = ys.trim().parse().map_err(|_| Error::Csv {
            row,
            message: format!("non-numeric value field '{ys}'"),
        })?;
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(Error::Csv {
                    row,
                    message: format!("times must be strictly increasing: {prev} then {t}"),
                });
            }
        }
        times.push(t);
        values.push(y);
    }
    if times.len() < 2 {
        return Err(Error::Csv {
            row: times.len(),
            message: format!("need at least 2 data rows, got {}", times.len()),
        });
    }
    SampleSeries::new(TimeGrid::new(times)?, values)
}

pub fn save_csv(series: &SampleSeries, path: &Path) -> Result<()> {
    write_columns(path, &["t", "y"], series.grid().knots(), &[series.values()])
}

/// Writes a header row and aligned numeric columns, LF-terminated.
pub fn write_columns(path: &Path, header: &[&str], t: &[f64], cols: &[&[f64]]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, &ti) in t.iter().enumerate() {
        out.push_str(&format_f64(ti));
        for col in cols {
            out.push(',');
            out.push_str(&format_f64(col[i]));
        }
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| io_err(path, e))
}

fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "nan".to_string()
    }
}

//! CSV traces and JSON artifacts.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use inexact_opt::trace::{Cell, TraceTable};
use serde::Serialize;

use crate::error::{io_err, json_err, BenchError, Result};

/// Owned trace, used when the solver report itself is not kept.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceBuffer {
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
}

impl TraceBuffer {
    pub fn capture<T: TraceTable + ?Sized>(trace: &T) -> Self {
        TraceBuffer {
            columns: trace.columns(),
            rows: trace.rows(),
        }
    }
}

impl TraceTable for TraceBuffer {
    fn columns(&self) -> &'static [&'static str] {
        self.columns
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        self.rows.clone()
    }
}

/// Floats carry 17 significant digits so they parse back to the same bits.
pub fn format_cell(cell: &Cell) -> String {
    match cell {
        Cell::Int(v) => v.to_string(),
        Cell::Float(v) => format!("{v:.16e}"),
        Cell::Bool(v) => v.to_string(),
    }
}

pub fn write_trace<T: TraceTable + ?Sized, W: Write>(trace: &T, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace.columns())?;
    for row in trace.rows() {
        w.write_record(row.iter().map(format_cell))?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_trace<T: TraceTable + ?Sized>(trace: &T, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    write_trace(trace, file).map_err(|source| BenchError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

/// Header and raw string rows of a trace file.
pub fn read_trace(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let csv_err = |source| BenchError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<csv::Result<Vec<Vec<String>>>>()
        .map_err(csv_err)?;
    Ok((header, rows))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(json_err(path))?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(json_err(path))
}

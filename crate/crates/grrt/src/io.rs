//! Plain CSV interchange: matrices are row-major real numbers without a
//! header, with dimensions inferred from the file.

use std::io::Write;
use std::path::Path;

use grrt_core::{KnotSequence, Matrix, PathEvent};
use serde::Serialize;

use crate::{Error, Result};

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut data = Vec::new();
    let mut cols = 0;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                field: i + 1,
                message: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    field: i + 1,
                    message: format!("non-finite value {field:?}"),
                });
            }
            data.push(v);
        }
        cols = record.len();
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            field: 0,
            message: "no data".into(),
        });
    }
    Ok(Matrix::from_row_major(rows, cols, &data)?)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => Error::Parse {
            path: path.to_path_buf(),
            line,
            field: len as usize,
            message: format!("expected {expected_len} fields, found {len}"),
        },
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            field: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Writes `m` with shortest round-trip formatting, so [`read_matrix`] gives
/// back the same bits.
pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for i in 0..m.rows() {
        w.write_record(m.row(i).iter().map(|v| format!("{v:?}")))
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One line of the experiment results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub scenario: String,
    pub algorithm: String,
    pub selector: String,
    pub alpha: Option<f64>,
    pub snr_db: f64,
    pub trials: usize,
    pub pe: f64,
    pub mse: f64,
    pub mean_k_selected: f64,
    pub fallback_rate: f64,
}

pub fn write_results<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("<results>", e))
}

/// One line per step of a selection run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticRow {
    pub k: usize,
    pub residual_norm: f64,
    pub residual_ratio: Option<f64>,
    pub gamma: Option<f64>,
    pub selected: bool,
}

pub fn write_diagnostics<W: Write>(out: W, rows: &[DiagnosticRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("<diagnostics>", e))
}

/// Knot trace: `knot, lambda, event, variable, active_size`, with 1-based
/// knot and variable numbers.
pub fn write_knots<W: Write>(out: W, path: &KnotSequence) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["knot", "lambda", "event", "variable", "active_size"])?;
    for (knot, lambda, event, size) in path.rows() {
        let (kind, var) = match event {
            PathEvent::Enter(j) => ("enter", j),
            PathEvent::Leave(j) => ("leave", j),
        };
        w.write_record([
            knot.to_string(),
            format!("{lambda:?}"),
            kind.to_string(),
            (var + 1).to_string(),
            size.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<knots>", e))
}

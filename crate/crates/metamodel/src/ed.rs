//! Experimental designs: input points with model responses, carried in both
//! physical and standardized coordinates, with CSV import/export
//! (header `x1..xM,y`, physical-space values).

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::input::{InputError, InputModel};
use crate::sampling::format_f64;

#[derive(Debug, Error)]
pub enum EdError {
    #[error("design CSV: {0}")]
    BadCsv(String),
    #[error("row {row} has {got} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("row {row}, column {col}: {value:?} is not a finite number")]
    BadNumber {
        row: usize,
        col: usize,
        value: String,
    },
    #[error("points are {rows}x{cols} but {responses} responses given")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        responses: usize,
    },
    #[error("design must contain at least one row")]
    Empty,
    #[error(transparent)]
    Input(#[from] InputError),
}

/// Design points and their model responses.
#[derive(Debug, Clone)]
pub struct ExperimentalDesign {
    pub physical: DMatrix<f64>,
    pub standardized: DMatrix<f64>,
    pub responses: DVector<f64>,
}

impl ExperimentalDesign {
    /// Builds the standardized coordinates through the input model.
    pub fn from_physical(
        model: &InputModel,
        physical: DMatrix<f64>,
        responses: DVector<f64>,
    ) -> Result<Self, EdError> {
        if physical.nrows() == 0 {
            return Err(EdError::Empty);
        }
        if physical.nrows() != responses.len() {
            return Err(EdError::ShapeMismatch {
                rows: physical.nrows(),
                cols: physical.ncols(),
                responses: responses.len(),
            });
        }
        let mut standardized = DMatrix::<f64>::zeros(physical.nrows(), physical.ncols());
        let mut x = vec![0.0; physical.ncols()];
        for i in 0..physical.nrows() {
            for j in 0..physical.ncols() {
                x[j] = physical[(i, j)];
            }
            let z = model.to_standard(&x)?;
            for j in 0..physical.ncols() {
                standardized[(i, j)] = z[j];
            }
        }
        Ok(Self {
            physical,
            standardized,
            responses,
        })
    }

    pub fn len(&self) -> usize {
        self.physical.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.physical.ncols()
    }

    /// CSV with header `x1..xM,y`; physical coordinates.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for d in 1..=self.dim() {
            out.push_str(&format!("x{d},"));
        }
        out.push_str("y\n");
        for i in 0..self.len() {
            for j in 0..self.dim() {
                out.push_str(&format_f64(self.physical[(i, j)]));
                out.push(',');
            }
            out.push_str(&format_f64(self.responses[i]));
            out.push('\n');
        }
        out
    }
}

/// Parses a points-plus-responses CSV (`x1..xM,y`). The header row is
/// required; field counts and numeric values are checked per row.
pub fn parse_ed_csv(text: &str) -> Result<(DMatrix<f64>, DVector<f64>), EdError> {
    let (points, mut columns) = parse_numeric_csv(text)?;
    if columns < 2 {
        return Err(EdError::BadCsv(
            "need at least one coordinate column and a response column".into(),
        ));
    }
    columns -= 1;
    let n = points.len() / (columns + 1);
    let mut x = DMatrix::<f64>::zeros(n, columns);
    let mut y = DVector::<f64>::zeros(n);
    for i in 0..n {
        for j in 0..columns {
            x[(i, j)] = points[i * (columns + 1) + j];
        }
        y[i] = points[i * (columns + 1) + columns];
    }
    Ok((x, y))
}

/// Parses a points-only CSV (`x1..xM`).
pub fn parse_points_csv(text: &str) -> Result<DMatrix<f64>, EdError> {
    let (points, columns) = parse_numeric_csv(text)?;
    let n = points.len() / columns;
    Ok(DMatrix::from_fn(n, columns, |i, j| points[i * columns + j]))
}

/// Parses a one-value-per-row response CSV; a single non-numeric header
/// line is tolerated.
pub fn parse_response_csv(text: &str) -> Result<Vec<f64>, EdError> {
    let mut out = Vec::new();
    for (row, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match trimmed.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ if row == 0 && out.is_empty() => continue, // header
            _ => {
                return Err(EdError::BadNumber {
                    row,
                    col: 0,
                    value: trimmed.to_string(),
                })
            }
        }
    }
    if out.is_empty() {
        return Err(EdError::Empty);
    }
    Ok(out)
}

fn parse_numeric_csv(text: &str) -> Result<(Vec<f64>, usize), EdError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let width = reader
        .headers()
        .map_err(|e| EdError::BadCsv(e.to_string()))?
        .len();
    if width == 0 {
        return Err(EdError::Empty);
    }
    let mut values = Vec::new();
    let mut rows = 0usize;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| EdError::BadCsv(e.to_string()))?;
        if record.len() == 1 && record[0].is_empty() {
            continue; // blank line
        }
        if record.len() != width {
            return Err(EdError::RaggedRow {
                row,
                got: record.len(),
                expected: width,
            });
        }
        for (col, field) in record.iter().enumerate() {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(EdError::BadNumber {
                        row,
                        col,
                        value: field.to_string(),
                    })
                }
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(EdError::Empty);
    }
    Ok((values, width))
}

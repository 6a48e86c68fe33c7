//! Delimited numeric tables with an optional integer label column, and the
//! center/rescale normalization applied before learning.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A parsed table: features plus, when a label column was requested, dense
/// class ids 0..c and the original label values they stand for.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularData {
    pub features: DMatrix<f64>,
    pub labels: Option<Vec<usize>>,
    /// Original label value for each dense id.
    pub label_values: Option<Vec<i64>>,
}

/// Reads a delimited UTF-8 table. Empty (whitespace-only) lines are skipped,
/// so a trailing newline does not add a row. `label_column` selects a
/// zero-based column holding integer class labels, which are remapped to
/// dense ids in increasing value order.
pub fn load_dataset(
    path: impl AsRef<Path>,
    delimiter: char,
    label_column: Option<usize>,
) -> Result<TabularData> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut width: Option<usize> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<i64> = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(delimiter).map(str::trim).collect();
        match width {
            None => {
                if let Some(c) = label_column {
                    if c >= cells.len() {
                        return Err(Error::data(format!(
                            "{}:{}: label column {} out of range for {} columns",
                            path.display(),
                            lineno,
                            c,
                            cells.len()
                        )));
                    }
                }
                width = Some(cells.len());
            }
            Some(w) if cells.len() != w => {
                return Err(Error::data(format!(
                    "{}:{}: ragged row with {} cells, expected {}",
                    path.display(),
                    lineno,
                    cells.len(),
                    w
                )));
            }
            Some(_) => {}
        }
        let mut row = Vec::with_capacity(cells.len());
        for (col, cell) in cells.iter().enumerate() {
            if Some(col) == label_column {
                raw_labels.push(parse_label(cell).ok_or_else(|| {
                    Error::data(format!(
                        "{}:{}: label column holds '{cell}', expected an integer",
                        path.display(),
                        lineno
                    ))
                })?);
            } else {
                let value: f64 = cell.parse().map_err(|_| {
                    Error::data(format!(
                        "{}:{}: cell {} holds '{cell}', expected a number",
                        path.display(),
                        lineno,
                        col + 1
                    ))
                })?;
                row.push(value);
            }
        }
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(Error::data(format!("{}: no data rows", path.display())));
    }
    let d = rows[0].len();
    let features = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);

    if label_column.is_some() {
        let mut values: Vec<i64> = raw_labels.clone();
        values.sort_unstable();
        values.dedup();
        let labels = raw_labels
            .iter()
            .map(|v| values.binary_search(v).expect("label value indexed above"))
            .collect();
        Ok(TabularData {
            features,
            labels: Some(labels),
            label_values: Some(values),
        })
    } else {
        Ok(TabularData {
            features,
            labels: None,
            label_values: None,
        })
    }
}

fn parse_label(cell: &str) -> Option<i64> {
    if let Ok(v) = cell.parse::<i64>() {
        return Some(v);
    }
    // Accept integral floats such as "2.0".
    let f: f64 = cell.parse().ok()?;
    if f.is_finite() && f.fract() == 0.0 && f.abs() <= i64::MAX as f64 {
        Some(f as i64)
    } else {
        None
    }
}

/// Writes a table readable by `load_dataset`. Floats use the shortest
/// round-tripping decimal form; labels, when given, become the final column.
pub fn save_dataset(
    path: impl AsRef<Path>,
    features: &DMatrix<f64>,
    labels: Option<&[usize]>,
    delimiter: char,
) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != features.nrows() {
            return Err(Error::dimension(format!(
                "{} labels for {} rows",
                l.len(),
                features.nrows()
            )));
        }
    }
    let mut out = String::new();
    for i in 0..features.nrows() {
        for j in 0..features.ncols() {
            if j > 0 {
                out.push(delimiter);
            }
            let _ = write!(out, "{}", features[(i, j)]);
        }
        if let Some(l) = labels {
            if features.ncols() > 0 {
                out.push(delimiter);
            }
            let _ = write!(out, "{}", l[i]);
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Which shift and scale `normalize` applied per column.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizeReport {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// Columns with (numerically) zero variance: centered only, scale 1.
    pub constant_columns: Vec<usize>,
}

/// Centers each column and rescales it to unit standard deviation, using the
/// population convention (divisor n). Zero-variance columns are centered,
/// left at scale 1, and flagged.
pub fn normalize(features: &DMatrix<f64>) -> Result<(DMatrix<f64>, NormalizeReport)> {
    let n = features.nrows();
    if n < 2 {
        return Err(Error::data(format!(
            "normalization needs at least 2 rows, got {n}"
        )));
    }
    let d = features.ncols();
    let mut out = features.clone();
    let mut means = Vec::with_capacity(d);
    let mut scales = Vec::with_capacity(d);
    let mut constant_columns = Vec::new();
    for j in 0..d {
        let col = features.column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        let scale = if std <= 1e-12 * (1.0 + mean.abs()) {
            constant_columns.push(j);
            1.0
        } else {
            std
        };
        for i in 0..n {
            out[(i, j)] = (features[(i, j)] - mean) / scale;
        }
        means.push(mean);
        scales.push(scale);
    }
    Ok((
        out,
        NormalizeReport {
            means,
            scales,
            constant_columns,
        },
    ))
}

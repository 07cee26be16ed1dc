//! On-disk sample format.
//!
//! ```text
//! # grid: t1,t2,...,tG          (required first line)
//! # weights: w1,w2,...,wG       (optional; uniform 1/G inferred when absent)
//! # grid2: s1,s2,...,sM         (optional second axis for surfaces)
//! # label: free text            (optional)
//! v11,v12,...,v1G               (one observation per row, full precision)
//! ...
//! ```
//!
//! Values are printed with Rust's shortest round-trip representation, so a
//! save/load cycle reproduces the matrix bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use super::{FunctionalSample, Grid};
use crate::error::{Error, Result};

fn parse_floats(body: &str, line: usize) -> Result<Vec<f64>> {
    body.split(',')
        .map(|tok| {
            let tok = tok.trim();
            tok.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse '{tok}' as a number"),
            })
        })
        .collect()
}

fn float_row(vals: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in vals.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{v}");
    }
    s
}

/// Parses the sample format from a string (line numbers are 1-based).
pub fn parse_sample(text: &str) -> Result<FunctionalSample> {
    let mut grid_pts: Option<Vec<f64>> = None;
    let mut grid2_pts: Option<Vec<f64>> = None;
    let mut weights: Option<Vec<f64>> = None;
    let mut label = String::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            let rest = rest.trim_start();
            if let Some(body) = rest.strip_prefix("grid:") {
                grid_pts = Some(parse_floats(body, line)?);
            } else if let Some(body) = rest.strip_prefix("grid2:") {
                grid2_pts = Some(parse_floats(body, line)?);
            } else if let Some(body) = rest.strip_prefix("weights:") {
                weights = Some(parse_floats(body, line)?);
            } else if let Some(body) = rest.strip_prefix("label:") {
                label = body.trim().to_string();
            } else {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown header line '{trimmed}'"),
                });
            }
            continue;
        }
        if grid_pts.is_none() {
            return Err(Error::Parse {
                line,
                message: "data row before the '# grid:' header".into(),
            });
        }
        let row = parse_floats(trimmed, line)?;
        if let Some(w) = width {
            if row.len() != w {
                return Err(Error::Parse {
                    line,
                    message: format!("ragged row: expected {w} values, got {}", row.len()),
                });
            }
        } else {
            width = Some(row.len());
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse { line, message: "non-finite entry".into() });
        }
        rows.push(row);
    }

    let grid_pts = grid_pts.ok_or(Error::Parse { line: 1, message: "missing '# grid:' header".into() })?;
    let total = grid_pts.len() * grid2_pts.as_ref().map_or(1, |a| a.len());
    if width != Some(total) {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "grid declares {total} points but rows have {} values",
                width.unwrap_or(0)
            ),
        });
    }
    let inferred = weights.is_none();
    let weights = weights.unwrap_or_else(|| vec![1.0 / total as f64; total]);
    if weights.len() != total {
        return Err(Error::Parse {
            line: 2,
            message: format!("{} weights for {total} grid points", weights.len()),
        });
    }
    let grid = match grid2_pts {
        None => Grid::with_weights(grid_pts, weights)?,
        Some(ax2) => Grid::with_weights_2d(grid_pts, ax2, weights)?,
    };
    let n = rows.len();
    let values = DMatrix::from_fn(n.max(1), total, |i, j| rows[i][j]);
    let mut sample = FunctionalSample::new(values, grid, label)?;
    sample.inferred_uniform_weights = inferred;
    Ok(sample)
}

/// Renders a grid + row matrix in the sample format.
pub fn render_functions(grid: &Grid, values: &DMatrix<f64>, label: &str) -> String {
    let mut out = String::new();
    out.push_str("# grid: ");
    out.push_str(&float_row(&grid.axes()[0]));
    out.push('\n');
    if grid.dim() == 2 {
        out.push_str("# grid2: ");
        out.push_str(&float_row(&grid.axes()[1]));
        out.push('\n');
    }
    out.push_str("# weights: ");
    out.push_str(&float_row(grid.weights()));
    out.push('\n');
    if !label.is_empty() {
        out.push_str("# label: ");
        out.push_str(label);
        out.push('\n');
    }
    for i in 0..values.nrows() {
        let row: Vec<f64> = values.row(i).iter().copied().collect();
        out.push_str(&float_row(&row));
        out.push('\n');
    }
    out
}

/// Loads a functional sample from the CSV format.
pub fn load_sample(path: impl AsRef<Path>) -> Result<FunctionalSample> {
    let text = std::fs::read_to_string(path)?;
    parse_sample(&text)
}

/// Saves a functional sample; weights are always written explicitly.
pub fn save_sample(s: &FunctionalSample, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, render_functions(s.grid(), s.values(), s.label()))?;
    Ok(())
}

/// Writes an arbitrary row-per-function matrix (e.g. eigenfunctions) in the
/// same format, for plotting outside the crate.
pub fn write_functions_csv(
    grid: &Grid,
    values: &DMatrix<f64>,
    label: &str,
    path: impl AsRef<Path>,
) -> Result<()> {
    std::fs::write(path, render_functions(grid, values, label))?;
    Ok(())
}

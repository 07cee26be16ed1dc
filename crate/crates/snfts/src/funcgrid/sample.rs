//! Samples of discretized functional observations and their centering.

use nalgebra::DMatrix;

use super::Grid;
use crate::error::{Error, Result};

/// `N` discretized curves/surfaces on a shared quadrature grid.
///
/// Row `i` of `values` is observation `i` evaluated on the (flattened) grid.
#[derive(Debug, Clone)]
pub struct FunctionalSample {
    values: DMatrix<f64>,
    grid: Grid,
    label: String,
    /// Set when the on-disk source omitted the weight line and uniform
    /// weights `1/G` were inferred.
    pub inferred_uniform_weights: bool,
}

impl FunctionalSample {
    pub fn new(values: DMatrix<f64>, grid: Grid, label: impl Into<String>) -> Result<Self> {
        if values.nrows() < 2 {
            return Err(Error::InsufficientData(format!(
                "a functional sample needs >= 2 observations, got {}",
                values.nrows()
            )));
        }
        if values.ncols() != grid.len() {
            return Err(Error::Dimension(format!(
                "sample has {} columns but the grid has {} points",
                values.ncols(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("sample contains non-finite values".into()));
        }
        Ok(FunctionalSample {
            values,
            grid,
            label: label.into(),
            inferred_uniform_weights: false,
        })
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Number of grid points.
    pub fn n_points(&self) -> usize {
        self.values.ncols()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn set_label(&mut self, label: impl Into<String>) {
        self.label = label.into();
    }

    /// Observation `i` as a slice view is not contiguous in `nalgebra`'s
    /// column-major layout, so this copies the row.
    pub fn curve(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Consumes the sample, returning the raw matrix.
    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }
}

/// Two samples on an identical grid, pooled for two-sample inference.
#[derive(Debug, Clone)]
pub struct SamplePair {
    pub x: FunctionalSample,
    pub y: FunctionalSample,
}

impl SamplePair {
    /// Pairs two samples; the grids must match exactly (points and weights).
    pub fn new(x: FunctionalSample, y: FunctionalSample) -> Result<Self> {
        if x.grid() != y.grid() {
            return Err(Error::Dimension(
                "the two samples must share an identical grid (points and weights)".into(),
            ));
        }
        Ok(SamplePair { x, y })
    }

    pub fn n1(&self) -> usize {
        self.x.n()
    }

    pub fn n2(&self) -> usize {
        self.y.n()
    }

    /// Pooled sample size `N = N1 + N2`.
    pub fn n(&self) -> usize {
        self.n1() + self.n2()
    }

    /// `gamma1 = N1/N`; `gamma1() + gamma2() == 1` exactly.
    pub fn gamma1(&self) -> f64 {
        self.n1() as f64 / self.n() as f64
    }

    pub fn gamma2(&self) -> f64 {
        1.0 - self.gamma1()
    }

    pub fn grid(&self) -> &Grid {
        self.x.grid()
    }

    /// Subsample sizes `(m, m') = (floor(k N1/N), floor(k N2/N))` for a
    /// pooled index `k`.
    pub fn subsample_sizes(&self, k: usize) -> (usize, usize) {
        (k * self.n1() / self.n(), k * self.n2() / self.n())
    }
}

/// Subtracts the cross-sectional mean function; returns the centered sample
/// and the mean.
pub fn center(s: &FunctionalSample) -> (FunctionalSample, Vec<f64>) {
    let n = s.n() as f64;
    let mean: Vec<f64> = (0..s.n_points()).map(|j| s.values().column(j).sum() / n).collect();
    let mut values = s.values().clone();
    for j in 0..values.ncols() {
        let m = mean[j];
        for i in 0..values.nrows() {
            values[(i, j)] -= m;
        }
    }
    let out = FunctionalSample {
        values,
        grid: s.grid().clone(),
        label: s.label().to_string(),
        inferred_uniform_weights: s.inferred_uniform_weights,
    };
    (out, mean)
}

/// Removes per-phase mean functions: after the call, the mean over rows
/// `{i : i mod period == r}` is zero for every phase `r`.
pub fn seasonal_demean(s: &FunctionalSample, period: usize) -> Result<FunctionalSample> {
    if period == 0 {
        return Err(Error::InvalidConfig("seasonal period must be >= 1".into()));
    }
    if s.n() < 2 * period {
        return Err(Error::InsufficientData(format!(
            "seasonal demeaning with period {period} needs >= {} observations, got {}",
            2 * period,
            s.n()
        )));
    }
    let mut values = s.values().clone();
    for r in 0..period {
        let rows: Vec<usize> = (r..s.n()).step_by(period).collect();
        let cnt = rows.len() as f64;
        for j in 0..values.ncols() {
            let m: f64 = rows.iter().map(|&i| values[(i, j)]).sum::<f64>() / cnt;
            for &i in &rows {
                values[(i, j)] -= m;
            }
        }
    }
    Ok(FunctionalSample {
        values,
        grid: s.grid().clone(),
        label: s.label().to_string(),
        inferred_uniform_weights: s.inferred_uniform_weights,
    })
}

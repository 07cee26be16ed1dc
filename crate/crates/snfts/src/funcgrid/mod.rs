//! Functional-data core: quadrature grids, inner products, samples of
//! discretized curves/surfaces, basis smoothing and the on-disk format.
//!
//! All estimators in this crate consume functions evaluated on a shared
//! quadrature grid. Integrals are Riemann sums
//!
//! ```text
//! <f, g> = sum_t f(t) g(t) w(t),
//! ```
//!
//! with midpoint/uniform weights `1/G` on equispaced grids by default.
//! Two-dimensional domains are flattened row-major with product weights, so
//! everything downstream sees a single `(points, weights)` pair.

mod bspline;
mod io;
mod sample;

pub use bspline::{bspline_design, bspline_smooth, BSplineBasis};
pub use io::{load_sample, parse_sample, render_functions, save_sample, write_functions_csv};
pub use sample::{center, seasonal_demean, FunctionalSample, SamplePair};

use crate::error::{Error, Result};

/// Tolerance for the "weights sum to the domain measure" invariant.
const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A quadrature grid over `[0,1]` or `[0,1]^2`.
///
/// Holds one coordinate axis per dimension plus a flattened weight vector
/// (row-major for surfaces). Weights are strictly positive and sum to the
/// domain measure (one for both supported domains).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl Grid {
    /// Midpoint rule with `n` equispaced points on `[0,1]`, weights `1/n`.
    pub fn uniform(n: usize) -> Self {
        let points = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let weights = vec![1.0 / n as f64; n];
        Grid { axes: vec![points], weights }
    }

    /// Midpoint product rule on `[0,1]^2`, flattened row-major
    /// (the first axis is the slow index).
    pub fn uniform_2d(nx: usize, ny: usize) -> Self {
        let ax: Vec<f64> = (0..nx).map(|i| (i as f64 + 0.5) / nx as f64).collect();
        let ay: Vec<f64> = (0..ny).map(|i| (i as f64 + 0.5) / ny as f64).collect();
        let w = 1.0 / (nx as f64 * ny as f64);
        Grid { axes: vec![ax, ay], weights: vec![w; nx * ny] }
    }

    /// Grid from explicit 1-D points with inferred uniform weights `1/G`.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        let n = points.len();
        Self::with_weights(points, vec![1.0 / n as f64; n])
    }

    /// Grid from explicit 1-D points and weights; validates the invariants.
    pub fn with_weights(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let g = Grid { axes: vec![points], weights };
        g.validate()?;
        Ok(g)
    }

    /// Two-axis grid with explicit flattened weights (row-major).
    pub fn with_weights_2d(ax: Vec<f64>, ay: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != ax.len() * ay.len() {
            return Err(Error::Dimension(format!(
                "2-d grid needs {}x{} = {} weights, got {}",
                ax.len(),
                ay.len(),
                ax.len() * ay.len(),
                weights.len()
            )));
        }
        let g = Grid { axes: vec![ax, ay], weights };
        g.validate()?;
        Ok(g)
    }

    /// Trapezoid rule on explicit 1-D points spanning `[0,1]`.
    pub fn trapezoid(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidConfig("trapezoid rule needs >= 2 points".into()));
        }
        let n = points.len();
        let mut weights = vec![0.0; n];
        for i in 0..n - 1 {
            let h = points[i + 1] - points[i];
            weights[i] += 0.5 * h;
            weights[i + 1] += 0.5 * h;
        }
        // Close the ends so the weights integrate the full unit interval.
        weights[0] += points[0];
        weights[n - 1] += 1.0 - points[n - 1];
        Self::with_weights(points, weights)
    }

    fn validate(&self) -> Result<()> {
        for ax in &self.axes {
            if ax.is_empty() {
                return Err(Error::InvalidConfig("empty grid axis".into()));
            }
            if ax.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidConfig("grid points must be strictly increasing".into()));
            }
            if ax.iter().any(|p| !p.is_finite()) {
                return Err(Error::InvalidConfig("non-finite grid point".into()));
            }
        }
        if self.weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidConfig("quadrature weights must be strictly positive".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL * self.weights.len() as f64 {
            return Err(Error::InvalidConfig(format!(
                "quadrature weights sum to {sum}, expected the domain measure 1"
            )));
        }
        Ok(())
    }

    /// Number of (flattened) evaluation points.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Domain dimension (1 or 2).
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Coordinate axes (one per dimension).
    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    /// Points of a 1-D grid.
    ///
    /// Panics when called on a surface grid; use [`Grid::axes`] there.
    pub fn points(&self) -> &[f64] {
        assert_eq!(self.axes.len(), 1, "points() is defined for 1-d grids only");
        &self.axes[0]
    }

    /// Quadrature weight per flattened point.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Quadrature inner product `<f, g> = sum_t f(t) g(t) w(t)`.
    pub fn inner_product(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        if f.len() != self.len() || g.len() != self.len() {
            return Err(Error::Dimension(format!(
                "inner product needs length {}, got {} and {}",
                self.len(),
                f.len(),
                g.len()
            )));
        }
        Ok(f.iter().zip(g).zip(&self.weights).map(|((a, b), w)| a * b * w).sum())
    }

    /// Squared quadrature norm of `f`.
    pub fn norm_sq(&self, f: &[f64]) -> Result<f64> {
        self.inner_product(f, f)
    }
}

/// Free-function form of the quadrature inner product.
pub fn inner_product(f: &[f64], g: &[f64], grid: &Grid) -> Result<f64> {
    grid.inner_product(f, g)
}

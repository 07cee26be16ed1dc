//! B-spline basis construction and least-squares curve smoothing.
//!
//! Raw discrete observations are converted into functional objects by
//! projecting each row onto the span of `n_basis` B-splines (order 4, i.e.
//! cubic, by default) and re-evaluating the fit on the grid:
//!
//! ```text
//! c_i = argmin_c || B c - x_i ||^2,    smoothed_i = B c_i,
//! ```
//!
//! where `B` is the design matrix of the basis evaluated at the grid points.

use nalgebra::DMatrix;

use super::{FunctionalSample, Grid};
use crate::error::{Error, Result};

/// B-spline basis of a given order on `[0,1]` with a clamped, equispaced
/// knot vector.
#[derive(Debug, Clone)]
pub struct BSplineBasis {
    order: usize,
    knots: Vec<f64>,
    n_basis: usize,
}

impl BSplineBasis {
    /// `n_basis` functions of `order` (= degree + 1); `n_basis >= order`.
    pub fn new(n_basis: usize, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidConfig("spline order must be >= 1".into()));
        }
        if n_basis < order {
            return Err(Error::InvalidConfig(format!(
                "n_basis ({n_basis}) must be >= order ({order})"
            )));
        }
        let n_interior = n_basis - order;
        let mut knots = vec![0.0; order];
        for i in 1..=n_interior {
            knots.push(i as f64 / (n_interior + 1) as f64);
        }
        knots.extend(std::iter::repeat(1.0).take(order));
        Ok(BSplineBasis { order, knots, n_basis })
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Values of all basis functions at `t` (Cox–de Boor recursion).
    pub fn eval_all(&self, t: f64) -> Vec<f64> {
        let t = t.clamp(0.0, 1.0);
        let k = self.order;
        let knots = &self.knots;
        let mut out = vec![0.0; self.n_basis];

        // Index of the knot span containing t; the last span is closed.
        let mut span = self.n_basis - 1;
        if t < 1.0 {
            // knots[span] <= t < knots[span+1] with order-1 <= span <= n_basis-1
            span = match knots[k - 1..=self.n_basis].windows(2).position(|w| t >= w[0] && t < w[1])
            {
                Some(i) => i + k - 1,
                None => self.n_basis - 1,
            };
        }

        // De Boor's algorithm for the nonzero basis values on this span.
        let mut vals = vec![0.0; k];
        vals[0] = 1.0;
        for degree in 1..k {
            let mut saved = 0.0;
            for r in 0..degree {
                let left = knots[span + 1 + r - degree];
                let right = knots[span + 1 + r];
                let denom = right - left;
                let term = if denom > 0.0 { vals[r] / denom } else { 0.0 };
                vals[r] = saved + (right - t) * term;
                saved = (t - left) * term;
            }
            vals[degree] = saved;
        }
        for (r, v) in vals.into_iter().enumerate() {
            let idx = span + 1 + r - k;
            out[idx] = v;
        }
        out
    }
}

/// Design matrix of the basis at the given evaluation points (`P x n_basis`).
pub fn bspline_design(basis: &BSplineBasis, points: &[f64]) -> DMatrix<f64> {
    let mut design = DMatrix::zeros(points.len(), basis.n_basis());
    for (i, &t) in points.iter().enumerate() {
        for (j, v) in basis.eval_all(t).into_iter().enumerate() {
            design[(i, j)] = v;
        }
    }
    design
}

/// Least-squares projects every row of `raw` onto the span of `n_basis`
/// B-splines of the given order, re-evaluated on `grid`.
///
/// The fit is the plain (unweighted) least-squares solution over the
/// evaluation points, solved through one QR factorization of the design
/// matrix, so it is deterministic given `(raw, n_basis, order)`.
pub fn bspline_smooth(
    raw: &DMatrix<f64>,
    grid: &Grid,
    n_basis: usize,
    order: usize,
) -> Result<FunctionalSample> {
    let p = raw.ncols();
    if grid.len() != p {
        return Err(Error::Dimension(format!(
            "raw matrix has {p} columns but the grid has {} points",
            grid.len()
        )));
    }
    if grid.dim() != 1 {
        return Err(Error::InvalidConfig("b-spline smoothing is defined on 1-d grids".into()));
    }
    if n_basis > p {
        return Err(Error::InvalidConfig(format!(
            "underdetermined fit: n_basis ({n_basis}) exceeds the {p} evaluation points"
        )));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("raw matrix contains non-finite values".into()));
    }
    let basis = BSplineBasis::new(n_basis, order)?;
    let design = bspline_design(&basis, grid.points());
    // Thin QR: coefficients = R^{-1} Q' x, one factorization for all rows.
    let qr = design.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let qt_rows = q.transpose() * raw.transpose(); // n_basis x N
    let coeffs = r
        .solve_upper_triangular(&qt_rows)
        .ok_or_else(|| Error::Singular("rank-deficient b-spline design matrix".into()))?;
    let smoothed = (design * coeffs).transpose();
    FunctionalSample::new(smoothed, grid.clone(), "bspline-smoothed")
}

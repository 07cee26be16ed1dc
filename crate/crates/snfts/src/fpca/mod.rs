//! Covariance-operator estimation and functional principal components.
//!
//! The discretized covariance operator is a `G x G` kernel matrix acting on
//! grid functions through the quadrature weights:
//!
//! ```text
//! (C f)(t) = sum_s K(t,s) f(s) w(s).
//! ```
//!
//! Eigenpairs are computed in the weight-transformed symmetric form
//! `W^{1/2} K W^{1/2}` and back-transformed, which keeps the eigenfunctions
//! orthonormal under the quadrature inner product. For samples of `N` curves
//! the same spectrum is obtained much more cheaply from the `N x N` Gram
//! matrix of the curves; both routes are exposed and agree on the nonzero
//! spectrum.

mod cache;
mod recursive;

pub use cache::{PairCache, WindowPrep};
pub use recursive::{
    recursive_track, ProjectionBlock, RecursiveSpectra, RecursiveTrack, TrackMode,
};
pub(crate) use recursive::WindowState;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::funcgrid::{FunctionalSample, Grid, SamplePair};

/// Relative tolerance for the kernel symmetry check.
const SYMMETRY_TOL: f64 = 1e-12;

/// Relative eigenvalue threshold below which a component counts as
/// numerically rank deficient.
const RANK_TOL: f64 = 1e-12;

/// Inner products smaller than this (between unit-norm functions) make a
/// sign alignment ambiguous.
const ALIGN_TOL: f64 = 1e-12;

/// Discretized covariance kernel with its grid.
#[derive(Debug, Clone)]
pub struct CovOperator {
    kernel: DMatrix<f64>,
    grid: Grid,
    /// Subsample size the kernel was computed from.
    pub m: usize,
}

impl CovOperator {
    /// Wraps an explicit kernel; rejects non-square, grid-mismatched or
    /// non-symmetric (beyond tolerance) input.
    pub fn from_kernel(kernel: DMatrix<f64>, grid: Grid, m: usize) -> Result<Self> {
        if kernel.nrows() != kernel.ncols() || kernel.nrows() != grid.len() {
            return Err(Error::Dimension(format!(
                "kernel is {}x{} but the grid has {} points",
                kernel.nrows(),
                kernel.ncols(),
                grid.len()
            )));
        }
        let scale = kernel.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1e-300);
        for i in 0..kernel.nrows() {
            for j in (i + 1)..kernel.ncols() {
                if (kernel[(i, j)] - kernel[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::InvalidConfig(format!(
                        "kernel not symmetric at ({i},{j}): {} vs {}",
                        kernel[(i, j)],
                        kernel[(j, i)]
                    )));
                }
            }
        }
        Ok(CovOperator { kernel, grid, m })
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `int K(t,t) dt`, the quadrature trace of the operator.
    pub fn trace(&self) -> f64 {
        self.kernel.diagonal().iter().zip(self.grid.weights()).map(|(k, w)| k * w).sum()
    }
}

/// Ordered eigenvalues and quadrature-orthonormal eigenfunctions.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// `K x G` matrix; row `j` is the eigenfunction for `values[j]`.
    pub functions: DMatrix<f64>,
    pub grid: Grid,
    /// Indices whose sign alignment was ambiguous (near-zero inner product
    /// with the reference).
    pub alignment_degenerate: Vec<usize>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Eigenfunction `j` as an owned vector.
    pub fn function(&self, j: usize) -> Vec<f64> {
        self.functions.row(j).iter().copied().collect()
    }

    /// Shares of total variance explained, relative to the sum of the
    /// retained eigenvalues.
    pub fn explained_shares(&self) -> Vec<f64> {
        let total: f64 = self.values.iter().sum();
        if total <= 0.0 {
            return vec![0.0; self.values.len()];
        }
        self.values.iter().map(|v| v / total).collect()
    }
}

/// Principal-component scores `beta[i,j] = <curve_i, phi_j>`.
#[derive(Debug, Clone)]
pub struct ScoreMatrix {
    pub scores: DMatrix<f64>,
}

impl ScoreMatrix {
    /// Sample covariance (`1/N` convention) of the score columns.
    pub fn sample_cov(&self) -> DMatrix<f64> {
        let n = self.scores.nrows() as f64;
        self.scores.transpose() * &self.scores / n
    }
}

/// Sample covariance operator of the first `m` observations:
/// `K(t,s) = (1/m) sum_{i<=m} X_i(t) X_i(s)`.
///
/// The sample is assumed centered.
pub fn empirical_cov(s: &FunctionalSample, m: usize) -> Result<CovOperator> {
    if m < 2 || m > s.n() {
        return Err(Error::InsufficientData(format!(
            "subsample size must satisfy 2 <= m <= {}, got {m}",
            s.n()
        )));
    }
    let head = s.values().rows(0, m);
    let kernel = head.transpose() * head / m as f64;
    Ok(CovOperator { kernel, grid: s.grid().clone(), m })
}

/// Pooled covariance operator `(N1 C_X + N2 C_Y) / (N1 + N2)`.
///
/// Computed literally as the weighted average of the two full-sample
/// operators so the identity holds exactly.
pub fn pooled_cov(pair: &SamplePair) -> Result<CovOperator> {
    let cx = empirical_cov(&pair.x, pair.n1())?;
    let cy = empirical_cov(&pair.y, pair.n2())?;
    let n = pair.n() as f64;
    let kernel = (cx.kernel * pair.n1() as f64 + cy.kernel * pair.n2() as f64) / n;
    Ok(CovOperator { kernel, grid: pair.grid().clone(), m: pair.n() })
}

fn sort_eigen_desc(vals: DVector<f64>, vecs: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    // Stable sort keeps first-occurrence order on ties.
    idx.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap());
    let sorted_vals: Vec<f64> = idx.iter().map(|&i| vals[i]).collect();
    let sorted_vecs = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |r, c| vecs[(r, idx[c])]);
    (sorted_vals, sorted_vecs)
}

/// Flips each row so its largest-magnitude entry is positive. A fixed
/// convention that makes eigendecompositions deterministic.
fn canonicalize_rows(functions: &mut DMatrix<f64>) {
    for j in 0..functions.nrows() {
        let mut best = 0usize;
        let mut best_abs = 0.0;
        for g in 0..functions.ncols() {
            let a = functions[(j, g)].abs();
            if a > best_abs {
                best_abs = a;
                best = g;
            }
        }
        if functions[(j, best)] < 0.0 {
            for g in 0..functions.ncols() {
                functions[(j, g)] = -functions[(j, g)];
            }
        }
    }
}

/// Top `k_max` eigenpairs of a covariance operator via the dense
/// weight-transformed eigenproblem.
pub fn eigen(c: &CovOperator, k_max: usize) -> Result<EigenSystem> {
    let g = c.grid.len();
    if k_max == 0 || k_max > g {
        return Err(Error::InvalidConfig(format!(
            "k_max must satisfy 1 <= k_max <= {g}, got {k_max}"
        )));
    }
    let sqrt_w: Vec<f64> = c.grid.weights().iter().map(|w| w.sqrt()).collect();
    let mut a = c.kernel.clone();
    for i in 0..g {
        for j in 0..g {
            a[(i, j)] *= sqrt_w[i] * sqrt_w[j];
        }
    }
    let se = a.symmetric_eigen();
    let (vals, vecs) = sort_eigen_desc(se.eigenvalues, se.eigenvectors);
    let mut functions = DMatrix::zeros(k_max, g);
    for j in 0..k_max {
        for t in 0..g {
            functions[(j, t)] = vecs[(t, j)] / sqrt_w[t];
        }
    }
    canonicalize_rows(&mut functions);
    Ok(EigenSystem {
        values: vals[..k_max].to_vec(),
        functions,
        grid: c.grid.clone(),
        alignment_degenerate: Vec::new(),
    })
}

/// Eigendecomposition of a sample covariance of the first `m` curves via
/// the `m x m` Gram matrix. Identical nonzero spectrum to [`eigen`] on
/// [`empirical_cov`], at `O(m^2 G + m^3)` cost.
pub fn sample_eigen(s: &FunctionalSample, m: usize, k_max: usize) -> Result<EigenSystem> {
    if m < 2 || m > s.n() {
        return Err(Error::InsufficientData(format!(
            "subsample size must satisfy 2 <= m <= {}, got {m}",
            s.n()
        )));
    }
    if k_max == 0 || k_max > m {
        return Err(Error::InvalidConfig(format!(
            "k_max must satisfy 1 <= k_max <= m = {m}, got {k_max}"
        )));
    }
    let gram = gram_matrix(s);
    let ge = gram_window_eigen(&gram, 0, m, k_max);
    if let Some(j) = ge.rank_deficient_at(k_max) {
        return Err(Error::RankDeficient(format!(
            "requested {k_max} components but component {} is numerically zero",
            j + 1
        )));
    }
    let head = s.values().rows(0, m);
    let mut functions = DMatrix::zeros(k_max, s.n_points());
    for j in 0..k_max {
        let scale = 1.0 / (m as f64 * ge.values[j]).sqrt();
        let coef = ge.coeffs.column(j);
        for t in 0..s.n_points() {
            let mut acc = 0.0;
            for i in 0..m {
                acc += coef[i] * head[(i, t)];
            }
            functions[(j, t)] = acc * scale;
        }
    }
    canonicalize_rows(&mut functions);
    Ok(EigenSystem {
        values: ge.values[..k_max].to_vec(),
        functions,
        grid: s.grid().clone(),
        alignment_degenerate: Vec::new(),
    })
}

/// Full-sample eigendecomposition through whichever route is cheaper: the
/// `N x N` Gram matrix when the sample is smaller than the grid, the dense
/// `G x G` kernel otherwise.
pub fn full_sample_eigen(s: &FunctionalSample, k_max: usize) -> Result<EigenSystem> {
    if s.n() <= s.n_points() {
        sample_eigen(s, s.n(), k_max)
    } else {
        eigen(&empirical_cov(s, s.n())?, k_max)
    }
}

/// Quadrature Gram matrix `R[i,j] = <X_i, X_j>` of all curves in a sample.
pub fn gram_matrix(s: &FunctionalSample) -> DMatrix<f64> {
    let mut scaled = s.values().clone();
    for (j, &w) in s.grid().weights().iter().enumerate() {
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= w;
        }
    }
    s.values() * scaled.transpose()
}

/// Eigenpairs of the covariance of a contiguous window of curves, in
/// coefficient space (coefficients refer to the window's rows).
pub(crate) struct GramEigen {
    /// Eigenvalues of the window covariance, descending, clamped at zero.
    pub values: Vec<f64>,
    /// `m x k` orthonormal coefficient vectors.
    pub coeffs: DMatrix<f64>,
}

impl GramEigen {
    /// First component among `0..k` that is numerically zero, if any.
    pub fn rank_deficient_at(&self, k: usize) -> Option<usize> {
        let top = self.values.first().copied().unwrap_or(0.0);
        (0..k.min(self.values.len())).find(|&j| self.values[j] <= top * RANK_TOL || self.values[j] <= 0.0)
    }
}

/// Eigendecomposition of an already-scaled covariance Gram block,
/// returning the leading `k_max` pairs.
pub(crate) fn gram_eigen_scaled(block: DMatrix<f64>, k_max: usize) -> GramEigen {
    let m = block.nrows();
    let se = block.symmetric_eigen();
    let (vals, vecs) = sort_eigen_desc(se.eigenvalues, se.eigenvectors);
    let k = k_max.min(m);
    let values: Vec<f64> = vals[..k].iter().map(|v| v.max(0.0)).collect();
    let coeffs = vecs.columns(0, k).into_owned();
    GramEigen { values, coeffs }
}

/// Eigendecomposition of `Gram[start..start+m, start..start+m] / m`,
/// returning the leading `k_max` pairs.
pub(crate) fn gram_window_eigen(
    gram: &DMatrix<f64>,
    start: usize,
    m: usize,
    k_max: usize,
) -> GramEigen {
    let block = gram.view((start, start), (m, m)).into_owned() / m as f64;
    gram_eigen_scaled(block, k_max)
}

/// Flips eigenfunctions so `<phi_j, ref_j> >= 0`; eigenvalues unchanged.
/// Near-zero inner products keep their sign and are recorded as degenerate.
pub fn align_signs(e: &EigenSystem, reference: &EigenSystem) -> Result<EigenSystem> {
    if e.grid != reference.grid {
        return Err(Error::Dimension("sign alignment requires matching grids".into()));
    }
    let mut out = e.clone();
    let k = e.len().min(reference.len());
    for j in 0..k {
        let ip = e.grid.inner_product(&e.function(j), &reference.function(j))?;
        if ip.abs() <= ALIGN_TOL {
            if !out.alignment_degenerate.contains(&j) {
                out.alignment_degenerate.push(j);
            }
        } else if ip < 0.0 {
            for t in 0..out.functions.ncols() {
                out.functions[(j, t)] = -out.functions[(j, t)];
            }
        }
    }
    Ok(out)
}

/// Score matrix `beta[i,j] = <curve_i, phi_j>`.
pub fn scores(s: &FunctionalSample, e: &EigenSystem) -> Result<ScoreMatrix> {
    if s.grid() != &e.grid {
        return Err(Error::Dimension("scores require the sample and eigensystem grids to match".into()));
    }
    let mut scaled = e.functions.clone();
    for (t, &w) in e.grid.weights().iter().enumerate() {
        for j in 0..scaled.nrows() {
            scaled[(j, t)] *= w;
        }
    }
    Ok(ScoreMatrix { scores: s.values() * scaled.transpose() })
}

/// Smallest `J <= j_max` whose cumulative share of the first `j_max`
/// eigenvalues strictly exceeds `threshold`.
pub fn select_k(pooled_values: &[f64], threshold: f64, j_max: usize) -> Result<usize> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "selection threshold must lie in (0,1), got {threshold}"
        )));
    }
    if pooled_values.len() < j_max {
        return Err(Error::InsufficientData(format!(
            "need {j_max} eigenvalues for the selection rule, got {}",
            pooled_values.len()
        )));
    }
    let total: f64 = pooled_values[..j_max].iter().sum();
    if total <= 0.0 {
        return Err(Error::RankDeficient("all candidate eigenvalues are zero".into()));
    }
    let mut cum = 0.0;
    for (j, v) in pooled_values[..j_max].iter().enumerate() {
        cum += v;
        if cum / total > threshold {
            return Ok(j + 1);
        }
    }
    Ok(j_max)
}

/// Residual of the discretized eigenequation for pair `j`:
/// `|| C phi_j - lambda_j phi_j ||` under the quadrature norm.
pub fn eigen_residual(c: &CovOperator, e: &EigenSystem, j: usize) -> Result<f64> {
    let phi = e.function(j);
    let g = c.grid.len();
    let mut r = vec![0.0; g];
    for t in 0..g {
        let mut acc = 0.0;
        for s in 0..g {
            acc += c.kernel[(t, s)] * phi[s] * c.grid.weights()[s];
        }
        r[t] = acc - e.values[j] * phi[t];
    }
    Ok(c.grid.norm_sq(&r)?.sqrt())
}

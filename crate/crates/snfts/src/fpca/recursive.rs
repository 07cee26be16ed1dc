//! Recursive (growing-subsample) estimates over the pooled sample index.
//!
//! For a pooled index `k` the subsample sizes are `m = floor(k N1/N)` and
//! `m' = floor(k N2/N)`. Depending on the mode, the estimate at `k` is
//!
//! - the vech of the covariance-difference projections
//!   `<(C_{X,m} - C_{Y,m'}) phi_pool^i, phi_pool^j>` for `i,j <= K`;
//! - the eigenvalue differences `lambda_X^j(m) - lambda_Y^j(m')`;
//! - the componentwise eigenvalue ratios;
//! - projections of the eigenfunction differences
//!   `phi_X^j(m) - phi_Y^j(m')` onto basis functions built from the pooled
//!   eigensystem.
//!
//! Pooled indices whose subsample would have fewer than two observations
//! (or, for eigenfunction/ratio modes, fewer observations than requested
//! eigencomponents) are excluded; the sum weights `k^2` make those early
//! terms negligible anyway. The final entry (`k = N`) always reproduces the
//! full-sample estimate exactly because it runs through the same code path.
//!
//! All subsample eigenproblems are solved in Gram (coefficient) space, so
//! no grid-sized work happens per `k`; projections onto the pooled basis
//! come from precomputed score matrices.

use nalgebra::{DMatrix, DVector};

use super::{gram_window_eigen, PairCache};
use crate::error::{Error, Result};
use crate::funcgrid::SamplePair;

/// Relative threshold below which a subsample eigenvalue counts as zero.
const EIGVAL_RANK_TOL: f64 = 1e-12;

/// Threshold on `|<phi_hat, reference>|` below which a sign alignment is
/// ambiguous.
const SIGN_TOL: f64 = 1e-12;

/// Ratio-mode guard: denominators below `1e-10 * lambda_1` are singular.
const RATIO_TOL: f64 = 1e-10;

/// One basis block of an eigenfunction-projection track: the difference of
/// the `component`-th eigenfunctions is projected onto basis elements, each
/// of which is a sum of pooled eigenfunctions (1-based indices).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionBlock {
    pub component: usize,
    pub elements: Vec<Vec<usize>>,
}

impl ProjectionBlock {
    /// Highest pooled index referenced by this block.
    pub fn max_pooled_index(&self) -> usize {
        self.elements.iter().flatten().copied().max().unwrap_or(0)
    }
}

/// What a recursive track estimates at each pooled index.
#[derive(Debug, Clone, PartialEq)]
pub enum TrackMode {
    /// `vech` of the `K x K` covariance-difference projection matrix.
    CovProjection { k: usize },
    /// Differences of the selected eigenvalues (1-based indices).
    EigvalDiff { indices: Vec<usize> },
    /// Ratios of the selected eigenvalues.
    EigvalRatio { indices: Vec<usize> },
    /// Stacked projections of eigenfunction differences.
    EigfunProjection { blocks: Vec<ProjectionBlock> },
}

impl TrackMode {
    /// Dimension of the track vectors.
    pub fn dim(&self) -> usize {
        match self {
            TrackMode::CovProjection { k } => k * (k + 1) / 2,
            TrackMode::EigvalDiff { indices } | TrackMode::EigvalRatio { indices } => indices.len(),
            TrackMode::EigfunProjection { blocks } => {
                blocks.iter().map(|b| b.elements.len()).sum()
            }
        }
    }

    /// Eigencomponent depth required of both subsample eigendecompositions.
    pub fn required_rank(&self) -> usize {
        match self {
            TrackMode::CovProjection { .. } => 0,
            TrackMode::EigvalDiff { indices } | TrackMode::EigvalRatio { indices } => {
                indices.iter().copied().max().unwrap_or(0)
            }
            TrackMode::EigfunProjection { blocks } => {
                blocks.iter().map(|b| b.component).max().unwrap_or(0)
            }
        }
    }

    /// Pooled-eigensystem depth required (projection bases / K).
    pub fn required_pooled(&self) -> usize {
        match self {
            TrackMode::CovProjection { k } => *k,
            TrackMode::EigvalDiff { .. } | TrackMode::EigvalRatio { .. } => 0,
            TrackMode::EigfunProjection { blocks } => {
                blocks.iter().map(|b| b.max_pooled_index()).max().unwrap_or(0)
            }
        }
    }
}

/// The sequence of recursive estimates indexed by pooled index `k`.
#[derive(Debug, Clone)]
pub struct RecursiveTrack {
    /// Included pooled indices, ascending; the last is always `N`.
    pub ks: Vec<usize>,
    /// One estimate per entry of `ks`; constant dimension.
    pub vectors: Vec<DVector<f64>>,
    pub mode: TrackMode,
    /// Pooled sample size.
    pub n: usize,
}

impl RecursiveTrack {
    /// The full-sample estimate (`k = N`).
    pub fn final_vector(&self) -> &DVector<f64> {
        self.vectors.last().expect("track is never empty")
    }

    pub fn dim(&self) -> usize {
        self.mode.dim()
    }
}

/// Per-`k` subsample spectra: eigenvalues of both subsample covariances and
/// the (sign-aligned) projections of their eigenfunctions onto the pooled
/// eigensystem. Everything downstream of the Gram eigensolves.
#[derive(Debug, Clone)]
pub struct RecursiveSpectra {
    pub ks: Vec<usize>,
    pub m_x: Vec<usize>,
    pub m_y: Vec<usize>,
    /// Retained eigencomponent depth per subsample.
    pub rank: usize,
    /// Retained pooled-projection depth.
    pub p: usize,
    /// `n_k x rank` eigenvalues (zero beyond the numerical rank).
    pub lam_x: DMatrix<f64>,
    pub lam_y: DMatrix<f64>,
    /// Numerically valid eigencomponent count at each `k`.
    pub valid_x: Vec<usize>,
    pub valid_y: Vec<usize>,
    /// Per `k`: `rank x p` matrices `<phi_hat^j(sub), phi_pool^i>`,
    /// rows zero beyond the valid rank.
    pub proj_x: Vec<DMatrix<f64>>,
    pub proj_y: Vec<DMatrix<f64>>,
    /// Components whose sign alignment was ambiguous at some `k`.
    pub sign_degenerate: Vec<usize>,
}

/// Eigenvalues and aligned pooled projections of the covariance of one set
/// of curves from a sample, in Gram/coefficient space.
pub(crate) struct WindowState {
    pub m: usize,
    /// Leading eigenvalues, zero-padded to the requested rank.
    pub lam: Vec<f64>,
    /// Numerically valid eigencomponent count.
    pub valid: usize,
    /// `rank x p` projections onto the pooled basis, sign-aligned.
    pub proj: DMatrix<f64>,
}

/// Rows of a sample entering a window: a contiguous range or an explicit
/// index set (bootstrap resamples).
#[derive(Clone, Copy)]
pub(crate) enum WindowRows<'a> {
    Range { start: usize, len: usize },
    Gather(&'a [usize]),
}

impl WindowRows<'_> {
    fn len(&self) -> usize {
        match self {
            WindowRows::Range { len, .. } => *len,
            WindowRows::Gather(idx) => idx.len(),
        }
    }

    fn row(&self, r: usize) -> usize {
        match self {
            WindowRows::Range { start, .. } => start + r,
            WindowRows::Gather(idx) => idx[r],
        }
    }
}

/// Eigenvalues + aligned pooled projections for one window of one sample.
///
/// `scores_pool` has `p` columns of scores against the pooled basis and
/// `scores_self` at least `rank` columns against the alignment reference;
/// both are indexed by original sample row.
#[allow(clippy::too_many_arguments)]
pub(crate) fn window_state(
    gram: &DMatrix<f64>,
    rows: WindowRows,
    rank: usize,
    p: usize,
    scores_pool: &DMatrix<f64>,
    scores_self: &DMatrix<f64>,
    sign_degenerate: &mut Vec<usize>,
) -> WindowState {
    let m = rows.len();
    let avail = rank.min(m);
    let ge = match rows {
        WindowRows::Range { start, len } => gram_window_eigen(gram, start, len, avail),
        WindowRows::Gather(idx) => {
            let block =
                DMatrix::from_fn(m, m, |a, b| gram[(idx[a], idx[b])]) / m as f64;
            super::gram_eigen_scaled(block, avail)
        }
    };
    let top = ge.values.first().copied().unwrap_or(0.0);
    let mut lam = vec![0.0; rank];
    lam[..avail].copy_from_slice(&ge.values);
    let mut valid = 0;
    while valid < avail && lam[valid] > top * EIGVAL_RANK_TOL && lam[valid] > 0.0 {
        valid += 1;
    }
    let mut proj = DMatrix::zeros(rank, p);
    for j in 0..valid {
        let scale = 1.0 / (m as f64 * lam[j]).sqrt();
        let coef = ge.coeffs.column(j);
        // Sign: <phi_hat^j(window), phi_ref^j> through the self scores.
        let mut self_ip = 0.0;
        for r in 0..m {
            self_ip += coef[r] * scores_self[(rows.row(r), j)];
        }
        self_ip *= scale;
        let sign = if self_ip.abs() <= SIGN_TOL {
            if !sign_degenerate.contains(&(j + 1)) {
                sign_degenerate.push(j + 1);
            }
            1.0
        } else if self_ip < 0.0 {
            -1.0
        } else {
            1.0
        };
        for i in 0..p {
            let mut acc = 0.0;
            for r in 0..m {
                acc += coef[r] * scores_pool[(rows.row(r), i)];
            }
            proj[(j, i)] = sign * scale * acc;
        }
    }
    WindowState { m, lam, valid, proj }
}

/// Computes the recursive spectra for all pooled indices with at least two
/// observations in each subsample.
///
/// `scores_pool_*` are the samples' scores against the first `p` pooled
/// eigenfunctions; `scores_self_*` are their scores against the first
/// `rank` full-sample eigenfunctions of the X sample (the sign-alignment
/// reference for both samples).
#[allow(clippy::too_many_arguments)]
pub(crate) fn recursive_spectra_from_parts(
    pair: &SamplePair,
    rank: usize,
    p: usize,
    gram_x: &DMatrix<f64>,
    gram_y: &DMatrix<f64>,
    scores_pool_x: &DMatrix<f64>,
    scores_pool_y: &DMatrix<f64>,
    scores_self_x: &DMatrix<f64>,
    scores_self_y: &DMatrix<f64>,
) -> Result<RecursiveSpectra> {
    if rank == 0 {
        return Err(Error::InvalidConfig("recursive spectra need rank >= 1".into()));
    }
    let n = pair.n();
    let mut ks = Vec::new();
    let mut m_x = Vec::new();
    let mut m_y = Vec::new();
    let mut lam_x_rows: Vec<Vec<f64>> = Vec::new();
    let mut lam_y_rows: Vec<Vec<f64>> = Vec::new();
    let mut valid_x = Vec::new();
    let mut valid_y = Vec::new();
    let mut proj_x = Vec::new();
    let mut proj_y = Vec::new();
    let mut sign_degenerate = Vec::new();

    let mut state_x: Option<WindowState> = None;
    let mut state_y: Option<WindowState> = None;

    for k in 2..=n {
        let (m, mp) = pair.subsample_sizes(k);
        if m < 2 || mp < 2 {
            continue;
        }
        if state_x.as_ref().map(|s| s.m) != Some(m) {
            state_x = Some(window_state(
                gram_x,
                WindowRows::Range { start: 0, len: m },
                rank,
                p,
                scores_pool_x,
                scores_self_x,
                &mut sign_degenerate,
            ));
        }
        if state_y.as_ref().map(|s| s.m) != Some(mp) {
            state_y = Some(window_state(
                gram_y,
                WindowRows::Range { start: 0, len: mp },
                rank,
                p,
                scores_pool_y,
                scores_self_y,
                &mut sign_degenerate,
            ));
        }
        let sx = state_x.as_ref().unwrap();
        let sy = state_y.as_ref().unwrap();
        ks.push(k);
        m_x.push(m);
        m_y.push(mp);
        lam_x_rows.push(sx.lam.clone());
        lam_y_rows.push(sy.lam.clone());
        valid_x.push(sx.valid);
        valid_y.push(sy.valid);
        proj_x.push(sx.proj.clone());
        proj_y.push(sy.proj.clone());
    }
    if ks.is_empty() {
        return Err(Error::InsufficientData(
            "no pooled index yields two observations in each subsample".into(),
        ));
    }
    let nk = ks.len();
    let lam_x = DMatrix::from_fn(nk, rank, |i, j| lam_x_rows[i][j]);
    let lam_y = DMatrix::from_fn(nk, rank, |i, j| lam_y_rows[i][j]);
    Ok(RecursiveSpectra {
        ks,
        m_x,
        m_y,
        rank,
        p,
        lam_x,
        lam_y,
        valid_x,
        valid_y,
        proj_x,
        proj_y,
        sign_degenerate,
    })
}

/// Assembles a covariance-projection track from pooled scores by a single
/// pass of prefix outer-product sums (no eigensolves).
pub(crate) fn cov_projection_track(
    pair: &SamplePair,
    k_proj: usize,
    scores_pool_x: &DMatrix<f64>,
    scores_pool_y: &DMatrix<f64>,
) -> Result<RecursiveTrack> {
    if k_proj == 0 || scores_pool_x.ncols() < k_proj || scores_pool_y.ncols() < k_proj {
        return Err(Error::InvalidConfig(format!(
            "covariance projection needs pooled scores of width >= K = {k_proj}"
        )));
    }
    let n = pair.n();
    let d = k_proj * (k_proj + 1) / 2;
    let mut sum_x = DMatrix::<f64>::zeros(k_proj, k_proj);
    let mut sum_y = DMatrix::<f64>::zeros(k_proj, k_proj);
    let mut done_x = 0usize;
    let mut done_y = 0usize;
    let mut ks = Vec::new();
    let mut vectors = Vec::new();
    for k in 2..=n {
        let (m, mp) = pair.subsample_sizes(k);
        while done_x < m {
            for i in 0..k_proj {
                let si = scores_pool_x[(done_x, i)];
                for j in 0..k_proj {
                    sum_x[(i, j)] += si * scores_pool_x[(done_x, j)];
                }
            }
            done_x += 1;
        }
        while done_y < mp {
            for i in 0..k_proj {
                let si = scores_pool_y[(done_y, i)];
                for j in 0..k_proj {
                    sum_y[(i, j)] += si * scores_pool_y[(done_y, j)];
                }
            }
            done_y += 1;
        }
        if m < 2 || mp < 2 {
            continue;
        }
        let mut v = DVector::zeros(d);
        let mut idx = 0;
        for j in 0..k_proj {
            for i in j..k_proj {
                v[idx] = sum_x[(i, j)] / m as f64 - sum_y[(i, j)] / mp as f64;
                idx += 1;
            }
        }
        ks.push(k);
        vectors.push(v);
    }
    if ks.is_empty() {
        return Err(Error::InsufficientData(
            "no pooled index yields two observations in each subsample".into(),
        ));
    }
    Ok(RecursiveTrack { ks, vectors, mode: TrackMode::CovProjection { k: k_proj }, n })
}

/// Assembles eigenvalue/eigenfunction tracks from precomputed spectra.
pub(crate) fn track_from_spectra(
    spectra: &RecursiveSpectra,
    mode: &TrackMode,
    n: usize,
) -> Result<RecursiveTrack> {
    let rank_needed = mode.required_rank();
    if rank_needed > spectra.rank {
        return Err(Error::InvalidConfig(format!(
            "track needs eigencomponent depth {rank_needed} but the spectra retain {}",
            spectra.rank
        )));
    }
    if mode.required_pooled() > spectra.p {
        return Err(Error::InvalidConfig(format!(
            "track needs pooled depth {} but the spectra retain {}",
            mode.required_pooled(),
            spectra.p
        )));
    }
    let mut ks = Vec::new();
    let mut vectors = Vec::new();
    for (i, &k) in spectra.ks.iter().enumerate() {
        match mode {
            TrackMode::EigvalDiff { indices } => {
                let v = DVector::from_iterator(
                    indices.len(),
                    indices.iter().map(|&j| spectra.lam_x[(i, j - 1)] - spectra.lam_y[(i, j - 1)]),
                );
                ks.push(k);
                vectors.push(v);
            }
            TrackMode::EigvalRatio { indices } => {
                // Ratios need the components to exist on both subsamples.
                if spectra.m_x[i] < rank_needed || spectra.m_y[i] < rank_needed {
                    continue;
                }
                let top_y = spectra.lam_y[(i, 0)];
                let mut v = DVector::zeros(indices.len());
                for (c, &j) in indices.iter().enumerate() {
                    let den = spectra.lam_y[(i, j - 1)];
                    if den <= RATIO_TOL * top_y || den <= 0.0 {
                        return Err(Error::Singular(format!(
                            "eigenvalue ratio denominator {den:.3e} at pooled index {k} \
                             (component {j}) is below tolerance"
                        )));
                    }
                    v[c] = spectra.lam_x[(i, j - 1)] / den;
                }
                ks.push(k);
                vectors.push(v);
            }
            TrackMode::EigfunProjection { blocks } => {
                if spectra.m_x[i] < rank_needed || spectra.m_y[i] < rank_needed {
                    continue;
                }
                if spectra.valid_x[i] < rank_needed || spectra.valid_y[i] < rank_needed {
                    return Err(Error::RankDeficient(format!(
                        "subsample covariance at pooled index {k} has numerical rank below \
                         the {rank_needed} requested eigenfunctions"
                    )));
                }
                let px = &spectra.proj_x[i];
                let py = &spectra.proj_y[i];
                let dim = mode.dim();
                let mut v = DVector::zeros(dim);
                let mut idx = 0;
                for b in blocks {
                    let j = b.component - 1;
                    for el in &b.elements {
                        let mut acc = 0.0;
                        for &pi in el {
                            acc += px[(j, pi - 1)] - py[(j, pi - 1)];
                        }
                        v[idx] = acc;
                        idx += 1;
                    }
                }
                ks.push(k);
                vectors.push(v);
            }
            TrackMode::CovProjection { .. } => {
                return Err(Error::InvalidConfig(
                    "covariance projections are not assembled from spectra".into(),
                ))
            }
        }
    }
    if ks.is_empty() {
        return Err(Error::InsufficientData("empty recursive index range".into()));
    }
    Ok(RecursiveTrack { ks, vectors, mode: mode.clone(), n })
}

/// Computes a recursive track for a (centered) sample pair, deriving all
/// intermediate quantities itself. [`PairCache`] offers the same through a
/// reusable cache when several tests share one pair.
pub fn recursive_track(pair: &SamplePair, mode: &TrackMode) -> Result<RecursiveTrack> {
    let mut cache = PairCache::new(pair);
    cache.track(mode)
}


//! Competitor tests: the chi-square-calibrated projection test, the
//! consistent-LRV test, nonoverlapping subsampling, and the i.i.d.
//! bootstrap.
//!
//! All of them test the same hypotheses as the self-normalized statistics
//! but calibrate differently; the experiment harness runs them side by
//! side to expose their size behavior under temporal dependence.

mod bootstrap;
mod lrv;
mod subsample;

pub use bootstrap::{iid_bootstrap_test, iid_bootstrap_test_with};
pub use lrv::{andrews_bandwidth, bartlett_lrv, AndrewsBandwidth, BandwidthRule, LrvConfig};
pub use subsample::{subsampling_test, subsampling_test_with, SubsampleConfig, SubsampleVariance};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fpca::{PairCache, ProjectionBlock, WindowPrep};
use crate::funcgrid::SamplePair;
use crate::sntest::{
    basis_blocks, chi_sq_result, BasisVariant, ComponentTarget, Diagnostics, TestResult,
};

/// What the subsampling/bootstrap tests compare.
#[derive(Debug, Clone)]
pub enum EigenTarget {
    /// Differences of eigenvalues.
    Eigenvalues(ComponentTarget),
    /// Projections of eigenfunction differences onto a pooled basis.
    Eigenfunctions { target: ComponentTarget, p: usize, variant: Option<BasisVariant> },
}

impl EigenTarget {
    pub fn label(&self) -> String {
        match self {
            EigenTarget::Eigenvalues(t) => format!("eigenvalues,{}", crate::sntest::target_label(*t)),
            EigenTarget::Eigenfunctions { target, p, variant } => {
                let v = variant.unwrap_or_else(|| BasisVariant::default_for(*target));
                format!("eigenfunctions,{},{},p={p}", crate::sntest::target_label(*target), v.name())
            }
        }
    }
}

/// Eigencomponent depth, pooled depth, and projection blocks for a target.
pub(crate) fn target_requirements(
    target: &EigenTarget,
) -> Result<(usize, usize, Vec<ProjectionBlock>)> {
    match target {
        EigenTarget::Eigenvalues(t) => {
            t.validate()?;
            Ok((t.max_index(), 0, Vec::new()))
        }
        EigenTarget::Eigenfunctions { target, p, variant } => {
            let v = variant.unwrap_or_else(|| BasisVariant::default_for(*target));
            let blocks = basis_blocks(v, *target, *p)?;
            let rank = blocks.iter().map(|b| b.component).max().unwrap_or(1);
            let depth = blocks.iter().map(|b| b.max_pooled_index()).max().unwrap_or(0);
            Ok((rank, depth, blocks))
        }
    }
}

/// Per-sample target estimate vectors from explicit row sets (identical
/// machinery for blocks and bootstrap resamples).
#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble_target_split(
    prep: &WindowPrep,
    cache: &mut PairCache,
    rows_x: &[usize],
    rows_y: &[usize],
    rank: usize,
    p: usize,
    blocks: &[ProjectionBlock],
    target: &EigenTarget,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let mut degen = Vec::new();
    let sx = cache.window_state_x(rows_x, rank, p, prep, &mut degen);
    let sy = cache.window_state_y(rows_y, rank, p, prep, &mut degen);
    let one = |state: &crate::fpca::WindowState| -> Result<DVector<f64>> {
        match target {
            EigenTarget::Eigenvalues(t) => {
                let idx = t.indices();
                Ok(DVector::from_iterator(idx.len(), idx.iter().map(|&j| state.lam[j - 1])))
            }
            EigenTarget::Eigenfunctions { .. } => {
                if state.valid < rank {
                    return Err(Error::RankDeficient(format!(
                        "window covariance rank below the {rank} requested eigenfunctions"
                    )));
                }
                let dim: usize = blocks.iter().map(|b| b.elements.len()).sum();
                let mut v = DVector::zeros(dim);
                let mut at = 0;
                for b in blocks {
                    let j = b.component - 1;
                    for el in &b.elements {
                        v[at] = el.iter().map(|&pi| state.proj[(j, pi - 1)]).sum();
                        at += 1;
                    }
                }
                Ok(v)
            }
        }
    };
    Ok((one(&sx)?, one(&sy)?))
}

/// Difference of the per-sample target estimates.
#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble_target_rows(
    prep: &WindowPrep,
    cache: &mut PairCache,
    rows_x: &[usize],
    rows_y: &[usize],
    rank: usize,
    p: usize,
    blocks: &[ProjectionBlock],
    target: &EigenTarget,
) -> Result<DVector<f64>> {
    let (vx, vy) = assemble_target_split(prep, cache, rows_x, rows_y, rank, p, blocks, target)?;
    Ok(vx - vy)
}

/// Chi-square-calibrated test for equality of covariance operators,
/// normalized by pooled score variances:
///
/// ```text
/// T = (N1 N2 / 2N) sum_{i,j<=K} c_N^{i,j}^2 / (rho_i rho_j),
/// rho_j = (1/N) { sum_a <X_a, phi^j>^2 + sum_b <Y_b, phi^j>^2 },
/// ```
///
/// compared against a chi-square with `K(K+1)/2` degrees of freedom. Exact
/// under independent Gaussian sampling; oversized under dependence.
pub fn pkm_test(pair: &SamplePair, k: usize, alpha: f64) -> Result<TestResult> {
    pkm_test_with(&mut PairCache::new(pair), k, alpha)
}

pub fn pkm_test_with(cache: &mut PairCache, k: usize, alpha: f64) -> Result<TestResult> {
    if k == 0 {
        return Err(Error::InvalidConfig("K must be >= 1".into()));
    }
    let (sx, sy) = cache.pooled_scores(k)?;
    let (n1, n2) = (cache.pair().n1(), cache.pair().n2());
    let n = (n1 + n2) as f64;
    let mut rho = vec![0.0f64; k];
    for j in 0..k {
        let mut acc = 0.0;
        for a in 0..n1 {
            acc += sx[(a, j)] * sx[(a, j)];
        }
        for b in 0..n2 {
            acc += sy[(b, j)] * sy[(b, j)];
        }
        rho[j] = acc / n;
    }
    if rho.iter().any(|&r| r <= 0.0) {
        return Err(Error::RankDeficient("degenerate pooled scores".into()));
    }
    let cx = sx.transpose() * &sx / n1 as f64;
    let cy = sy.transpose() * &sy / n2 as f64;
    let mut stat = 0.0;
    for i in 0..k {
        for j in 0..k {
            let c = cx[(i, j)] - cy[(i, j)];
            stat += c * c / (rho[i] * rho[j]);
        }
    }
    stat *= n1 as f64 * n2 as f64 / (2.0 * n);
    chi_sq_result(format!("pkm(K={k})"), stat, k * (k + 1) / 2, alpha, Diagnostics::default())
}

/// Consistent-LRV test `N alpha_N' Sigma_alpha^{-1} alpha_N` against a
/// chi-square with `d = K(K+1)/2` degrees of freedom.
///
/// `Sigma_alpha` is the Bartlett LRV of the pooled per-observation summand
/// series: walking the pooled index, each new X observation contributes
/// `(N/N1) vech(s_a s_a')` and each new Y observation `-(N/N2)
/// vech(s_b s_b')`, so the series mean is exactly `alpha_N`.
pub fn clrv_test(pair: &SamplePair, k: usize, cfg: &LrvConfig, alpha: f64) -> Result<TestResult> {
    clrv_test_with(&mut PairCache::new(pair), k, cfg, alpha)
}

pub fn clrv_test_with(
    cache: &mut PairCache,
    k: usize,
    cfg: &LrvConfig,
    alpha: f64,
) -> Result<TestResult> {
    if k == 0 {
        return Err(Error::InvalidConfig("K must be >= 1".into()));
    }
    cfg.validate()?;
    let (sx, sy) = cache.pooled_scores(k)?;
    let pair = cache.pair();
    let (n1, n2, n) = (pair.n1(), pair.n2(), pair.n());
    let d = k * (k + 1) / 2;
    let vech = |s: &DMatrix<f64>, row: usize, scale: f64, out: &mut DMatrix<f64>, at: usize| {
        let mut idx = 0;
        for j in 0..k {
            for i in j..k {
                out[(at, idx)] = scale * s[(row, i)] * s[(row, j)];
                idx += 1;
            }
        }
    };
    let mut series = DMatrix::zeros(n, d);
    let (mut done_x, mut done_y, mut at) = (0usize, 0usize, 0usize);
    for kk in 1..=n {
        let (m, mp) = pair.subsample_sizes(kk);
        while done_x < m {
            vech(&sx, done_x, n as f64 / n1 as f64, &mut series, at);
            done_x += 1;
            at += 1;
        }
        while done_y < mp {
            vech(&sy, done_y, -(n as f64) / n2 as f64, &mut series, at);
            done_y += 1;
            at += 1;
        }
    }
    debug_assert_eq!(at, n);
    let mut notes = Vec::new();
    let bandwidth = match cfg.bandwidth_rule {
        BandwidthRule::Fixed(b) => b,
        BandwidthRule::AndrewsAr1 => {
            let bw = andrews_bandwidth(&series)?;
            if !bw.clipped.is_empty() {
                notes.push(format!("AR(1) fit clipped for coordinate(s) {:?}", bw.clipped));
            }
            bw.bandwidth
        }
    };
    let sigma = bartlett_lrv(&series, bandwidth)?;
    let mut alpha_n = DVector::zeros(d);
    for j in 0..d {
        alpha_n[j] = series.column(j).sum() / n as f64;
    }
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("singular LRV estimate".into()))?;
    let sol = chol.solve(&alpha_n);
    let stat = n as f64 * alpha_n.dot(&sol);
    notes.push(format!("bandwidth={bandwidth:.3}"));
    chi_sq_result(
        format!("clrv(K={k})"),
        stat,
        d,
        alpha,
        Diagnostics { sn_condition: None, k_range: None, notes },
    )
}

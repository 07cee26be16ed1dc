//! Self-normalized two-sample test statistics.
//!
//! Every test in this module studentizes a full-sample estimate by a matrix
//! built from its own recursive (growing-subsample) estimates,
//!
//! ```text
//! V = N^{-2} sum_k k^2 (v_k - v_N)(v_k - v_N)',
//! G = N (v_N - center)' V^{-1} (v_N - center),
//! ```
//!
//! so no bandwidth or block length is ever chosen. Under the null, `G`
//! converges to the pivotal functional `W_q(eps)` whose quantiles come from
//! [`crate::nulldist`]. The trimmed sums start at `floor(N * eps)`; the
//! covariance-operator statistic is always untrimmed, matching its
//! definition.
//!
//! Statistics are evaluated in the normalized form above rather than with
//! the equivalent `N^3` prefactor on an unnormalized sum, which avoids
//! overflow at large `N`.

mod basis;
mod crosscorr;

pub use basis::{basis_blocks, build_basis, BasisVariant, ComponentTarget};
pub use crosscorr::lag0_crosscorr_sn;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fpca::{PairCache, RecursiveTrack, TrackMode};
use crate::funcgrid::SamplePair;
use crate::nulldist::{chi_sq_pvalue, chi_sq_quantile, NullTables, DEFAULT_LEVELS};

/// Condition numbers beyond this make a normalizer degenerate.
const CONDITION_LIMIT: f64 = 1e12;

/// Configuration shared by the self-normalized tests.
#[derive(Debug, Clone)]
pub struct TestConfig {
    /// Number of pooled eigenfunctions the covariance-operator statistic
    /// projects onto (`d = k(k+1)/2`).
    pub k: usize,
    /// Eigencomponents addressed by the eigenvalue/eigenfunction tests.
    pub target: ComponentTarget,
    /// Basis depth for eigenfunction projections (`max component <= p`).
    pub p: usize,
    /// Trimming fraction in `[0, 1)`; zero keeps every usable index.
    pub epsilon: f64,
    /// Basis construction; `None` picks the per-target default.
    pub basis_variant: Option<BasisVariant>,
    /// Nominal level.
    pub alpha: f64,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            k: 1,
            target: ComponentTarget::Leading(1),
            p: 4,
            epsilon: 0.0,
            basis_variant: None,
            alpha: 0.05,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("K must be >= 1".into()));
        }
        self.target.validate()?;
        if self.target.max_index() > self.p {
            return Err(Error::InvalidConfig(format!(
                "target component {} exceeds basis depth p = {}",
                self.target.max_index(),
                self.p
            )));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidConfig(format!(
                "trimming must lie in [0,1), got {}",
                self.epsilon
            )));
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn variant(&self) -> BasisVariant {
        self.basis_variant.unwrap_or_else(|| BasisVariant::default_for(self.target))
    }
}

/// Reference null distribution of a test statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NullRef {
    /// Pivotal functional `W_q(eps)`.
    Wq { q: usize, epsilon: f64 },
    /// Chi-square with `df` degrees of freedom.
    ChiSquared { df: usize },
    /// Empirical bootstrap quantile from `n_boot` resamples.
    Bootstrap { n_boot: usize },
}

impl NullRef {
    pub fn q(&self) -> usize {
        match *self {
            NullRef::Wq { q, .. } => q,
            NullRef::ChiSquared { df } => df,
            NullRef::Bootstrap { .. } => 1,
        }
    }

    pub fn epsilon(&self) -> f64 {
        match *self {
            NullRef::Wq { epsilon, .. } => epsilon,
            _ => 0.0,
        }
    }
}

/// Numerical diagnostics attached to a test result.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    /// Condition number of the SN normalizer, when one was formed.
    pub sn_condition: Option<f64>,
    /// First and last pooled index entering the normalizer.
    pub k_range: Option<(usize, usize)>,
    /// Free-form notes (clipped bandwidths, ambiguous sign alignments, ...).
    pub notes: Vec<String>,
}

/// Outcome of one two-sample test.
#[derive(Debug, Clone)]
pub struct TestResult {
    /// Short identifier of the test that produced this result.
    pub test: String,
    pub statistic: f64,
    pub null: NullRef,
    pub alpha: f64,
    /// Critical value at `alpha`.
    pub critical_value: f64,
    /// Interval of standard levels bounding the p-value.
    pub p_bracket: (f64, f64),
    /// Exact p-value where the reference null has a closed form.
    pub p_value: Option<f64>,
    pub reject: bool,
    pub diagnostics: Diagnostics,
}

impl std::fmt::Display for TestResult {
    /// Line-oriented report with a stable field order.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "test={} statistic={:.6} q={} eps={} bracket=[{},{}] critical={:.6} alpha={} reject={}",
            self.test,
            self.statistic,
            self.null.q(),
            self.null.epsilon(),
            self.p_bracket.0,
            self.p_bracket.1,
            self.critical_value,
            self.alpha,
            self.reject
        )
    }
}

/// Upper-tail probability of a level, rounded so `1 - 0.95` prints as
/// `0.05` in reports rather than a float-noise tail.
fn upper_tail(level: f64) -> f64 {
    ((1.0 - level) * 1e9).round() / 1e9
}

/// P-value bracket from quantiles tabulated at ascending `levels`.
pub(crate) fn bracket_from_quantiles(stat: f64, levels: &[f64], quantiles: &[f64]) -> (f64, f64) {
    debug_assert_eq!(levels.len(), quantiles.len());
    let mut below = levels.len();
    for (i, &q) in quantiles.iter().enumerate() {
        if stat <= q {
            below = i;
            break;
        }
    }
    if below == 0 {
        (upper_tail(levels[0]), 1.0)
    } else if below == levels.len() {
        (0.0, upper_tail(levels[levels.len() - 1]))
    } else {
        (upper_tail(levels[below]), upper_tail(levels[below - 1]))
    }
}

/// The self-normalization matrix and the quadratic form built from it.
pub(crate) struct SnQuadratic {
    pub matrix: DMatrix<f64>,
    pub condition: f64,
    pub k_range: (usize, usize),
    n: f64,
    inv_vals: Vec<f64>,
    vecs: DMatrix<f64>,
}

impl SnQuadratic {
    /// `N * c' V^{-1} c` through the eigendecomposition of `V`.
    pub fn statistic(&self, center: &DVector<f64>) -> f64 {
        let rotated = self.vecs.transpose() * center;
        let mut acc = 0.0;
        for (i, &iv) in self.inv_vals.iter().enumerate() {
            acc += rotated[i] * rotated[i] * iv;
        }
        self.n * acc
    }
}

/// Builds `V = N^{-2} sum k^2 (v_k - v_N)(v_k - v_N)'` over the trimmed
/// index range, rejecting numerically degenerate normalizers.
pub(crate) fn sn_quadratic(track: &RecursiveTrack, epsilon: f64) -> Result<SnQuadratic> {
    let n = track.n;
    let d = track.dim();
    let k_floor = ((n as f64) * epsilon).floor() as usize;
    let v_n = track.final_vector();
    let mut matrix = DMatrix::<f64>::zeros(d, d);
    let mut k_lo = None;
    for (i, &k) in track.ks.iter().enumerate() {
        if k < k_floor {
            continue;
        }
        k_lo.get_or_insert(k);
        let diff = &track.vectors[i] - v_n;
        let w = (k as f64) * (k as f64);
        for a in 0..d {
            let da = diff[a] * w;
            for b in a..d {
                matrix[(a, b)] += da * diff[b];
            }
        }
    }
    let k_lo = k_lo.ok_or_else(|| {
        Error::InsufficientData(format!(
            "trimming at floor(N*eps) = {k_floor} leaves no recursive indices"
        ))
    })?;
    for a in 0..d {
        for b in 0..a {
            matrix[(a, b)] = matrix[(b, a)];
        }
    }
    matrix /= (n as f64) * (n as f64);

    let se = matrix.clone().symmetric_eigen();
    let mut vals: Vec<f64> = se.eigenvalues.iter().copied().collect();
    let vecs = se.eigenvectors;
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if min <= 0.0 { f64::INFINITY } else { max / min };
    if !condition.is_finite() || condition > CONDITION_LIMIT || max <= 0.0 {
        return Err(Error::DegenerateNormalizer { condition });
    }
    for v in vals.iter_mut() {
        *v = 1.0 / *v;
    }
    Ok(SnQuadratic {
        matrix,
        condition,
        k_range: (k_lo, *track.ks.last().unwrap()),
        n: n as f64,
        inv_vals: vals,
        vecs,
    })
}

/// Public form of the SN matrix: the matrix and its condition number.
pub fn sn_matrix(track: &RecursiveTrack, epsilon: f64) -> Result<(DMatrix<f64>, f64)> {
    let quad = sn_quadratic(track, epsilon)?;
    Ok((quad.matrix, quad.condition))
}

fn wq_result(
    test: String,
    stat: f64,
    q: usize,
    epsilon: f64,
    alpha: f64,
    tables: &NullTables,
    quad: &SnQuadratic,
    notes: Vec<String>,
) -> Result<TestResult> {
    let table = tables.get(q, epsilon).ok_or(Error::MissingTable { q, epsilon })?;
    let critical = table.quantile(1.0 - alpha)?;
    let bracket = bracket_from_quantiles(stat, &table.levels, &table.quantiles);
    Ok(TestResult {
        test,
        statistic: stat,
        null: NullRef::Wq { q, epsilon },
        alpha,
        critical_value: critical,
        p_bracket: bracket,
        p_value: None,
        reject: stat > critical,
        diagnostics: Diagnostics {
            sn_condition: Some(quad.condition),
            k_range: Some(quad.k_range),
            notes,
        },
    })
}

/// Result assembly for chi-square calibrated statistics (baselines).
pub(crate) fn chi_sq_result(
    test: String,
    stat: f64,
    df: usize,
    alpha: f64,
    diagnostics: Diagnostics,
) -> Result<TestResult> {
    let critical = chi_sq_quantile(df, 1.0 - alpha)?;
    let quantiles: Vec<f64> = DEFAULT_LEVELS
        .iter()
        .map(|&l| chi_sq_quantile(df, l))
        .collect::<Result<_>>()?;
    let bracket = bracket_from_quantiles(stat, &DEFAULT_LEVELS, &quantiles);
    Ok(TestResult {
        test,
        statistic: stat,
        null: NullRef::ChiSquared { df },
        alpha,
        critical_value: critical,
        p_bracket: bracket,
        p_value: Some(chi_sq_pvalue(df, stat)?),
        reject: stat > critical,
        diagnostics,
    })
}

/// Two-sample test for equality of the covariance operators, projected on
/// the span of the first `K` pooled eigenfunctions. Untrimmed by
/// definition; compared against `W_d` with `d = K(K+1)/2`.
pub fn test_cov_operator(
    pair: &SamplePair,
    cfg: &TestConfig,
    tables: &NullTables,
) -> Result<TestResult> {
    test_cov_operator_with(&mut PairCache::new(pair), cfg, tables)
}

pub fn test_cov_operator_with(
    cache: &mut PairCache,
    cfg: &TestConfig,
    tables: &NullTables,
) -> Result<TestResult> {
    cfg.validate()?;
    let track = cache.track(&TrackMode::CovProjection { k: cfg.k })?;
    let quad = sn_quadratic(&track, 0.0)?;
    let stat = quad.statistic(track.final_vector());
    let d = cfg.k * (cfg.k + 1) / 2;
    wq_result(format!("sn-cov(K={})", cfg.k), stat, d, 0.0, cfg.alpha, tables, &quad, vec![])
}

/// Two-sample test for equality of eigenvalues (individually or jointly).
pub fn test_eigenvalues(
    pair: &SamplePair,
    cfg: &TestConfig,
    tables: &NullTables,
) -> Result<TestResult> {
    test_eigenvalues_with(&mut PairCache::new(pair), cfg, tables)
}

pub fn test_eigenvalues_with(
    cache: &mut PairCache,
    cfg: &TestConfig,
    tables: &NullTables,
) -> Result<TestResult> {
    cfg.validate()?;
    let indices = cfg.target.indices();
    let q = indices.len();
    let track = cache.track(&TrackMode::EigvalDiff { indices })?;
    let quad = sn_quadratic(&track, cfg.epsilon)?;
    let stat = quad.statistic(track.final_vector());
    wq_result(
        format!("sn-eigenvalues({})", target_label(cfg.target)),
        stat,
        q,
        cfg.epsilon,
        cfg.alpha,
        tables,
        &quad,
        vec![],
    )
}

/// Ratio form of the eigenvalue test, centered at a vector of ones.
pub fn test_eigenvalue_ratios(
    pair: &SamplePair,
    cfg: &TestConfig,
    tables: &NullTables,
) -> Result<TestResult> {
    test_eigenvalue_ratios_with(&mut PairCache::new(pair), cfg, tables)
}

pub fn test_eigenvalue_ratios_with(
    cache: &mut PairCache,
    cfg: &TestConfig,
    tables: &NullTables,
) -> Result<TestResult> {
    cfg.validate()?;
    let indices = cfg.target.indices();
    let q = indices.len();
    let track = cache.track(&TrackMode::EigvalRatio { indices })?;
    let quad = sn_quadratic(&track, cfg.epsilon)?;
    let center = track.final_vector() - DVector::from_element(q, 1.0);
    let stat = quad.statistic(&center);
    wq_result(
        format!("sn-eigenvalue-ratios({})", target_label(cfg.target)),
        stat,
        q,
        cfg.epsilon,
        cfg.alpha,
        tables,
        &quad,
        vec![],
    )
}

/// Two-sample test for equality of eigenfunctions via projections onto a
/// basis built from the pooled eigensystem; compared against `W_{M0}(eps)`
/// where `M0` is the stacked projection dimension.
pub fn test_eigenfunctions(
    pair: &SamplePair,
    cfg: &TestConfig,
    tables: &NullTables,
) -> Result<TestResult> {
    test_eigenfunctions_with(&mut PairCache::new(pair), cfg, tables)
}

pub fn test_eigenfunctions_with(
    cache: &mut PairCache,
    cfg: &TestConfig,
    tables: &NullTables,
) -> Result<TestResult> {
    cfg.validate()?;
    let variant = cfg.variant();
    let blocks = basis_blocks(variant, cfg.target, cfg.p)?;
    let mode = TrackMode::EigfunProjection { blocks };
    let m0 = mode.dim();
    let track = cache.track(&mode)?;
    let quad = sn_quadratic(&track, cfg.epsilon)?;
    let stat = quad.statistic(track.final_vector());
    let mut notes = Vec::new();
    let spectra = cache.spectra(mode.required_rank(), mode.required_pooled())?;
    if !spectra.sign_degenerate.is_empty() {
        notes.push(format!(
            "ambiguous sign alignment for component(s) {:?}",
            spectra.sign_degenerate
        ));
    }
    wq_result(
        format!("sn-eigenfunctions({},{},p={})", target_label(cfg.target), variant.name(), cfg.p),
        stat,
        m0,
        cfg.epsilon,
        cfg.alpha,
        tables,
        &quad,
        notes,
    )
}

pub(crate) fn target_label(target: ComponentTarget) -> String {
    match target {
        ComponentTarget::Component(j) => format!("j={j}"),
        ComponentTarget::Leading(c) => format!("M=1..{c}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp_test_support::*;
    use crate::fpca::recursive_track;

    #[test]
    fn sn_matrix_scalar_closed_form() {
        // Track v_k = (k/N) a for k = 2..N, d = 1. Then
        // V = a^2 N^{-4} sum k^2 (k - N)^2, a plain polynomial sum.
        let n = 10usize;
        let a = 1.7;
        let ks: Vec<usize> = (2..=n).collect();
        let vectors: Vec<DVector<f64>> =
            ks.iter().map(|&k| DVector::from_element(1, a * k as f64 / n as f64)).collect();
        let track = RecursiveTrack {
            ks,
            vectors,
            mode: TrackMode::EigvalDiff { indices: vec![1] },
            n,
        };
        let (m, cond) = sn_matrix(&track, 0.0).unwrap();
        let direct: f64 = (2..=n)
            .map(|k| {
                let k = k as f64;
                k * k * (k / n as f64 - 1.0).powi(2)
            })
            .sum::<f64>()
            * a
            * a
            / (n as f64).powi(2);
        assert!((m[(0, 0)] - direct).abs() < 1e-12 * direct);
        assert!(cond >= 1.0);
    }

    #[test]
    fn sn_matrix_scales_quadratically() {
        let n = 12usize;
        let ks: Vec<usize> = (2..=n).collect();
        let vectors: Vec<DVector<f64>> = ks
            .iter()
            .map(|&k| {
                DVector::from_vec(vec![(k as f64).sin(), (k as f64 * 0.3).cos() * 0.5])
            })
            .collect();
        let scaled: Vec<DVector<f64>> = vectors.iter().map(|v| v * 3.0).collect();
        let mk = |vecs: Vec<DVector<f64>>| RecursiveTrack {
            ks: ks.clone(),
            vectors: vecs,
            mode: TrackMode::EigvalDiff { indices: vec![1, 2] },
            n,
        };
        let (m1, _) = sn_matrix(&mk(vectors), 0.0).unwrap();
        let (m9, _) = sn_matrix(&mk(scaled), 0.0).unwrap();
        for (a, b) in m1.iter().zip(m9.iter()) {
            assert!((9.0 * a - b).abs() <= 1e-12 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn constant_track_is_degenerate() {
        let n = 8usize;
        let ks: Vec<usize> = (2..=n).collect();
        let vectors: Vec<DVector<f64>> =
            ks.iter().map(|_| DVector::from_element(1, 0.4)).collect();
        let track = RecursiveTrack {
            ks,
            vectors,
            mode: TrackMode::EigvalDiff { indices: vec![1] },
            n,
        };
        match sn_matrix(&track, 0.0) {
            Err(Error::DegenerateNormalizer { .. }) => {}
            other => panic!("expected degenerate normalizer, got {other:?}"),
        }
    }

    #[test]
    fn identical_datasets_degenerate_every_sn_test() {
        let x = centered_fourier_sample(24, 32, 0.5, 0.0, &[4.0, 0.5, 2.0, 0.3], 77);
        let pair = SamplePair::new(x.clone(), x).unwrap();
        let tables = toy_tables();
        let cfg = TestConfig { k: 1, ..Default::default() };
        for res in [
            test_cov_operator(&pair, &cfg, &tables),
            test_eigenvalues(&pair, &cfg, &tables),
            test_eigenvalue_ratios(&pair, &cfg, &tables),
            test_eigenfunctions(&pair, &cfg, &tables),
        ] {
            match res {
                Err(Error::DegenerateNormalizer { .. }) => {}
                other => panic!("expected degenerate normalizer, got {other:?}"),
            }
        }
    }

    #[test]
    fn ratio_track_final_vector_reflects_scaling() {
        let x = centered_fourier_sample(30, 32, 0.5, 0.0, &[4.0, 0.5, 2.0, 0.3], 5);
        let mut y = x.clone();
        let scaled = y.values() * 2.0;
        y = crate::funcgrid::FunctionalSample::new(scaled, x.grid().clone(), "y2").unwrap();
        let pair = SamplePair::new(x, y).unwrap();
        let track =
            recursive_track(&pair, &TrackMode::EigvalRatio { indices: vec![1, 2] }).unwrap();
        let last = track.final_vector();
        for c in 0..2 {
            assert!((last[c] - 0.25).abs() < 1e-10, "component {c}: {}", last[c]);
        }
    }

    #[test]
    fn scale_invariance_of_statistics() {
        let x = centered_fourier_sample(26, 48, 0.5, 0.0, &[4.0, 0.5, 2.0, 0.3], 11);
        let y = centered_fourier_sample(26, 48, 0.5, 0.0, &[4.0, 0.5, 2.0, 0.3], 12);
        let tables = toy_tables();
        let cfg = TestConfig { k: 2, target: ComponentTarget::Leading(2), ..Default::default() };
        let pair = SamplePair::new(x.clone(), y.clone()).unwrap();
        let base = [
            test_cov_operator(&pair, &cfg, &tables).unwrap().statistic,
            test_eigenvalues(&pair, &cfg, &tables).unwrap().statistic,
            test_eigenvalue_ratios(&pair, &cfg, &tables).unwrap().statistic,
            test_eigenfunctions(&pair, &cfg, &tables).unwrap().statistic,
        ];
        for c in [0.1f64, 3.0, 100.0] {
            let xs = crate::funcgrid::FunctionalSample::new(
                x.values() * c,
                x.grid().clone(),
                "xs",
            )
            .unwrap();
            let ys = crate::funcgrid::FunctionalSample::new(
                y.values() * c,
                y.grid().clone(),
                "ys",
            )
            .unwrap();
            let sp = SamplePair::new(xs, ys).unwrap();
            let got = [
                test_cov_operator(&sp, &cfg, &tables).unwrap().statistic,
                test_eigenvalues(&sp, &cfg, &tables).unwrap().statistic,
                test_eigenvalue_ratios(&sp, &cfg, &tables).unwrap().statistic,
                test_eigenfunctions(&sp, &cfg, &tables).unwrap().statistic,
            ];
            for (a, b) in base.iter().zip(got.iter()) {
                assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()), "c={c}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn bracket_bins_follow_the_level_grid() {
        let levels = DEFAULT_LEVELS;
        let quantiles = [10.0, 20.0, 30.0, 40.0, 50.0];
        assert_eq!(bracket_from_quantiles(5.0, &levels, &quantiles), (0.1, 1.0));
        assert_eq!(bracket_from_quantiles(15.0, &levels, &quantiles), (0.05, 0.1));
        assert_eq!(bracket_from_quantiles(25.0, &levels, &quantiles), (0.025, 0.05));
        assert_eq!(bracket_from_quantiles(35.0, &levels, &quantiles), (0.01, 0.025));
        assert_eq!(bracket_from_quantiles(45.0, &levels, &quantiles), (0.005, 0.01));
        assert_eq!(bracket_from_quantiles(55.0, &levels, &quantiles), (0.0, 0.005));
    }

    #[test]
    fn result_line_format_is_stable() {
        let r = TestResult {
            test: "sn-cov(K=1)".into(),
            statistic: 12.5,
            null: NullRef::Wq { q: 1, epsilon: 0.0 },
            alpha: 0.05,
            critical_value: 45.4,
            p_bracket: (0.1, 1.0),
            p_value: None,
            reject: false,
            diagnostics: Diagnostics::default(),
        };
        assert_eq!(
            r.to_string(),
            "test=sn-cov(K=1) statistic=12.500000 q=1 eps=0 bracket=[0.1,1] critical=45.400000 alpha=0.05 reject=false"
        );
    }
}

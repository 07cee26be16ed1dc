//! I.i.d. bootstrap test for eigencomponent differences (Benko-style).
//!
//! Curves are resampled with replacement within each sample; the target
//! difference is recomputed on each resample and centered at the observed
//! difference. The test rejects when the sup-norm of the observed
//! difference exceeds the `(1 - alpha)` empirical quantile of the centered
//! resampled sup-norms. Valid for independent observations; under temporal
//! dependence its level is distorted, which is exactly the comparison the
//! experiment harness draws.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fpca::PairCache;
use crate::funcgrid::SamplePair;
use crate::nulldist::{empirical_quantile, DEFAULT_LEVELS};
use crate::sntest::{bracket_from_quantiles, Diagnostics, NullRef, TestResult};

use super::{assemble_target_rows, target_requirements, EigenTarget};

/// I.i.d. bootstrap test; reproducible given the RNG state.
pub fn iid_bootstrap_test(
    pair: &SamplePair,
    target: &EigenTarget,
    n_boot: usize,
    alpha: f64,
    rng: &mut dyn rand::RngCore,
) -> Result<TestResult> {
    iid_bootstrap_test_with(&mut PairCache::new(pair), target, n_boot, alpha, rng)
}

pub fn iid_bootstrap_test_with(
    cache: &mut PairCache,
    target: &EigenTarget,
    n_boot: usize,
    alpha: f64,
    rng: &mut dyn rand::RngCore,
) -> Result<TestResult> {
    if n_boot < 200 {
        return Err(Error::InvalidConfig(format!(
            "bootstrap needs n_boot >= 200, got {n_boot}"
        )));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let (n1, n2) = (cache.pair().n1(), cache.pair().n2());
    let (rank, p, blocks) = target_requirements(target)?;
    let prep = cache.window_prep(rank, p)?;

    let all_x: Vec<usize> = (0..n1).collect();
    let all_y: Vec<usize> = (0..n2).collect();
    let observed = assemble_target_rows(&prep, cache, &all_x, &all_y, rank, p, &blocks, target)?;

    let mut sup_norms = Vec::with_capacity(n_boot);
    let mut idx_x = vec![0usize; n1];
    let mut idx_y = vec![0usize; n2];
    for _ in 0..n_boot {
        for slot in idx_x.iter_mut() {
            *slot = rng.random_range(0..n1);
        }
        for slot in idx_y.iter_mut() {
            *slot = rng.random_range(0..n2);
        }
        let draw = assemble_target_rows(&prep, cache, &idx_x, &idx_y, rank, p, &blocks, target)?;
        let centered: DVector<f64> = draw - &observed;
        sup_norms.push(centered.amax());
    }
    sup_norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let critical = empirical_quantile(&sup_norms, 1.0 - alpha);
    let stat = observed.amax();
    let quantiles: Vec<f64> =
        DEFAULT_LEVELS.iter().map(|&l| empirical_quantile(&sup_norms, l)).collect();
    let bracket = bracket_from_quantiles(stat, &DEFAULT_LEVELS, &quantiles);
    let exceed = sup_norms.iter().filter(|&&t| t >= stat).count();
    Ok(TestResult {
        test: format!("iid-bootstrap({},B={})", target.label(), n_boot),
        statistic: stat,
        null: NullRef::Bootstrap { n_boot },
        alpha,
        critical_value: critical,
        p_bracket: bracket,
        p_value: Some((exceed as f64 + 1.0) / (n_boot as f64 + 1.0)),
        reject: stat > critical,
        diagnostics: Diagnostics { sn_condition: None, k_range: None, notes: vec![], },
    })
}

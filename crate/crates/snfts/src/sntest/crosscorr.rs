//! Self-normalized test for zero lag-zero cross-correlation between two
//! scalar series, used as a per-location dependence diagnostic.
//!
//! The recursive estimates are the prefix sample correlations
//! `rho_k = corr(x_{1..k}, y_{1..k})` and the statistic is
//! `n rho_n^2 / (n^{-2} sum_k k^2 (rho_k - rho_n)^2)`, compared against
//! the `q = 1` pivotal null.

use crate::error::{Error, Result};
use crate::nulldist::NullTables;

use super::{bracket_from_quantiles, Diagnostics, NullRef, TestResult};

/// Self-normalized test of `corr(x_t, y_t) = 0` at lag zero.
pub fn lag0_crosscorr_sn(
    x: &[f64],
    y: &[f64],
    alpha: f64,
    tables: &NullTables,
) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!(
            "cross-correlation test needs series of length >= 10, got {n}"
        )));
    }
    // Prefix moments; correlations use prefix means.
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut rhos: Vec<(usize, f64)> = Vec::with_capacity(n);
    for (k, (&a, &b)) in x.iter().zip(y).enumerate() {
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
        let kf = (k + 1) as f64;
        if k == 0 {
            continue;
        }
        let vx = sxx - sx * sx / kf;
        let vy = syy - sy * sy / kf;
        if vx <= 0.0 || vy <= 0.0 {
            continue;
        }
        rhos.push((k + 1, (sxy - sx * sy / kf) / (vx * vy).sqrt()));
    }
    let Some(&(last_k, rho_n)) = rhos.last() else {
        return Err(Error::InvalidConfig("zero-variance series".into()));
    };
    if last_k != n {
        return Err(Error::InvalidConfig("zero-variance series".into()));
    }
    if rhos.len() < 4 {
        return Err(Error::InsufficientData(
            "too few usable prefixes for the self-normalizer".into(),
        ));
    }
    let nf = n as f64;
    let mut v = 0.0;
    for &(k, rho_k) in &rhos {
        let d = rho_k - rho_n;
        v += (k as f64) * (k as f64) * d * d;
    }
    v /= nf * nf;
    // A perfectly constant correlation track (e.g. y = x, rho == 1) has a
    // zero normalizer; the statistic diverges and rejects everywhere. Only
    // the 0/0 case is genuinely degenerate.
    let stat = nf * rho_n * rho_n / v;
    if stat.is_nan() {
        return Err(Error::DegenerateNormalizer { condition: f64::INFINITY });
    }
    let table = tables.get(1, 0.0).ok_or(Error::MissingTable { q: 1, epsilon: 0.0 })?;
    let critical = table.quantile(1.0 - alpha)?;
    let bracket = bracket_from_quantiles(stat, &table.levels, &table.quantiles);
    Ok(TestResult {
        test: "lag0-crosscorr-sn".into(),
        statistic: stat,
        null: NullRef::Wq { q: 1, epsilon: 0.0 },
        alpha,
        critical_value: critical,
        p_bracket: bracket,
        p_value: None,
        reject: stat > critical,
        diagnostics: Diagnostics {
            sn_condition: Some(1.0),
            k_range: Some((rhos[0].0, n)),
            notes: vec![],
        },
    })
}

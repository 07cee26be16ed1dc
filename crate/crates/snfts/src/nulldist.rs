//! Monte Carlo tabulation of the pivotal null functionals
//!
//! ```text
//! W_q(eps) = B_q(1)' J_q(eps)^{-1} B_q(1),
//! J_q(eps) = int_eps^1 (B_q(r) - r B_q(1)) (B_q(r) - r B_q(1))' dr,
//! ```
//!
//! where `B_q` is a vector of `q` independent standard Brownian motions.
//! Paths are simulated as cumulative sums of `N(0, 1/n_grid)` increments
//! and the integral is a left Riemann sum over `[eps, 1]`. Draws use
//! per-index RNG streams, so parallel and serial runs produce identical
//! samples and everything is reproducible from `(spec, seed)`.
//!
//! Chi-square quantiles for the baseline tests live here as well.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Quantile levels shipped in every table.
pub const DEFAULT_LEVELS: [f64; 5] = [0.90, 0.95, 0.975, 0.99, 0.995];

/// Default Brownian-path resolution for on-demand tabulation.
pub const DEFAULT_N_GRID: usize = 5000;

/// Default number of Monte Carlo draws for on-demand tabulation.
pub const DEFAULT_N_REP: usize = 100_000;

/// Specification of one `W_q(eps)` simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WqSpec {
    pub q: usize,
    pub epsilon: f64,
    pub n_grid: usize,
    pub n_rep: usize,
    pub seed: u64,
}

impl WqSpec {
    pub fn new(q: usize, epsilon: f64, n_grid: usize, n_rep: usize, seed: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidConfig("W_q needs q >= 1".into()));
        }
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::InvalidConfig(format!("trimming must lie in [0,1), got {epsilon}")));
        }
        if n_grid < 1000 {
            return Err(Error::InvalidConfig("n_grid must be >= 1000".into()));
        }
        if n_rep < 10_000 {
            return Err(Error::InvalidConfig("n_rep must be >= 10^4".into()));
        }
        Ok(WqSpec { q, epsilon, n_grid, n_rep, seed })
    }
}

/// One draw of `W_q(eps)` from a caller-provided RNG.
///
/// Returns `None` when `J` is numerically singular for this draw (a
/// probability-zero event at finite resolution); callers redraw.
pub fn wq_draw(q: usize, epsilon: f64, n_grid: usize, rng: &mut impl Rng) -> Option<f64> {
    let n = n_grid;
    let dt = 1.0 / n as f64;
    let sd = dt.sqrt();
    // Brownian paths at lattice points r_i = i/n, i = 1..=n (column-major:
    // paths[i] holds the q path values at r_{i+1}).
    let mut paths = vec![0.0f64; q * n];
    for dim in 0..q {
        let mut acc = 0.0;
        for i in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            acc += z * sd;
            paths[i * q + dim] = acc;
        }
    }
    let b1: Vec<f64> = paths[(n - 1) * q..].to_vec();

    // Left Riemann sum over lattice left endpoints r_i = i/n >= eps; the
    // i = 0 term (bridge value zero) contributes nothing.
    let i0 = (epsilon * n as f64).ceil() as usize;
    let mut j = DMatrix::<f64>::zeros(q, q);
    let mut bridge = vec![0.0f64; q];
    for i in i0.max(1)..n {
        let r = i as f64 * dt;
        let row = &paths[(i - 1) * q..i * q];
        for d in 0..q {
            bridge[d] = row[d] - r * b1[d];
        }
        for a in 0..q {
            let ba = bridge[a];
            for b in a..q {
                j[(a, b)] += ba * bridge[b];
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            j[(a, b)] = j[(b, a)];
        }
    }
    j *= dt;

    let chol = j.cholesky()?;
    let b1v = DVector::from_vec(b1);
    let sol = chol.solve(&b1v);
    let w = b1v.dot(&sol);
    w.is_finite().then_some(w)
}

/// Simulates `spec.n_rep` draws of `W_q(eps)` in parallel; returns the
/// draws (in draw-index order) and the number of singular redraws.
pub fn simulate_wq(spec: &WqSpec) -> (Vec<f64>, usize) {
    let redraws = std::sync::atomic::AtomicUsize::new(0);
    let draws: Vec<f64> = (0..spec.n_rep)
        .into_par_iter()
        .map(|idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(idx as u64);
            loop {
                match wq_draw(spec.q, spec.epsilon, spec.n_grid, &mut rng) {
                    Some(w) => return w,
                    None => {
                        redraws.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    }
                }
            }
        })
        .collect();
    (draws, redraws.into_inner())
}

/// Type-7 (linear interpolation of order statistics) empirical quantile.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Distribution-free standard-error proxy for an empirical quantile: half
/// the width of the order-statistic interval at one binomial standard
/// deviation around `p`.
fn quantile_stderr(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len() as f64;
    let s = (p * (1.0 - p) / n).sqrt();
    let lo = empirical_quantile(sorted, (p - s).max(0.0));
    let hi = empirical_quantile(sorted, (p + s).min(1.0));
    (hi - lo) / 2.0
}

/// Tabulated quantiles of one `W_q(eps)` simulation.
#[derive(Debug, Clone)]
pub struct QuantileTable {
    pub spec: WqSpec,
    pub levels: Vec<f64>,
    pub quantiles: Vec<f64>,
    pub standard_error: Vec<f64>,
    /// Singular redraws encountered during simulation.
    pub redraws: usize,
}

impl QuantileTable {
    /// Simulates the spec and extracts the requested levels.
    pub fn simulate(spec: WqSpec, levels: &[f64]) -> Result<Self> {
        if levels.is_empty() || levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("levels must be strictly increasing".into()));
        }
        if levels.iter().any(|&l| !(0.0 < l && l < 1.0)) {
            return Err(Error::InvalidConfig("levels must lie in (0,1)".into()));
        }
        let (mut draws, redraws) = simulate_wq(&spec);
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let quantiles: Vec<f64> = levels.iter().map(|&l| empirical_quantile(&draws, l)).collect();
        let standard_error: Vec<f64> =
            levels.iter().map(|&l| quantile_stderr(&draws, l)).collect();
        Ok(QuantileTable { spec, levels: levels.to_vec(), quantiles, standard_error, redraws })
    }

    /// Quantile at `level`: exact at tabulated levels, linear between them,
    /// an error outside the tabulated range.
    pub fn quantile(&self, level: f64) -> Result<f64> {
        let lo = *self.levels.first().unwrap();
        let hi = *self.levels.last().unwrap();
        if let Some(i) = self.levels.iter().position(|&l| l == level) {
            return Ok(self.quantiles[i]);
        }
        if level < lo || level > hi {
            return Err(Error::LevelOutOfRange { level, lo, hi });
        }
        let i = self.levels.iter().rposition(|&l| l < level).unwrap();
        let (l0, l1) = (self.levels[i], self.levels[i + 1]);
        let t = (level - l0) / (l1 - l0);
        Ok(self.quantiles[i] + t * (self.quantiles[i + 1] - self.quantiles[i]))
    }
}

/// Epsilon values are keyed by microunits so float noise cannot split a
/// table across keys.
fn eps_key(epsilon: f64) -> u64 {
    (epsilon * 1e6).round() as u64
}

/// A set of quantile tables keyed by `(q, eps)`, with plain-text
/// persistence.
///
/// File format, one record per table:
///
/// ```text
/// q eps n_grid n_rep seed
/// level quantile stderr     (one row per level)
/// ```
#[derive(Debug, Clone, Default)]
pub struct NullTables {
    tables: BTreeMap<(usize, u64), QuantileTable>,
}

/// Quantile cache shipped with the crate: `q = 1..=21`,
/// `eps in {0, 0.05, 0.1}`, `n_grid = 5000`, `n_rep = 1e5`.
const SHIPPED_CACHE: &str = include_str!("../data/wq_cache.txt");

impl NullTables {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The pre-computed cache embedded in the crate.
    pub fn shipped() -> Self {
        let mut t = Self::empty();
        t.merge_text(SHIPPED_CACHE).expect("embedded cache must parse");
        t
    }

    pub fn insert(&mut self, table: QuantileTable) {
        self.tables.insert((table.spec.q, eps_key(table.spec.epsilon)), table);
    }

    pub fn get(&self, q: usize, epsilon: f64) -> Option<&QuantileTable> {
        self.tables.get(&(q, eps_key(epsilon)))
    }

    pub fn tables(&self) -> impl Iterator<Item = &QuantileTable> {
        self.tables.values()
    }

    /// Quantile of `W_q(eps)` at `level` from the stored tables.
    pub fn quantile(&self, q: usize, epsilon: f64, level: f64) -> Result<f64> {
        let table = self
            .get(q, epsilon)
            .ok_or(Error::MissingTable { q, epsilon })?;
        table.quantile(level)
    }

    /// Deterministic per-table seed, so on-demand and pre-shipped tables
    /// for the same `(q, eps)` agree.
    pub fn derived_seed(q: usize, epsilon: f64) -> u64 {
        0x5eed_0000_0000_0000u64 ^ ((q as u64) << 20) ^ eps_key(epsilon)
    }

    /// Ensures a table exists, simulating it with the default spec when
    /// missing. The seed is derived from `(q, eps)` so on-demand tables are
    /// reproducible.
    pub fn ensure(&mut self, q: usize, epsilon: f64) -> Result<&QuantileTable> {
        let key = (q, eps_key(epsilon));
        if !self.tables.contains_key(&key) {
            let seed = Self::derived_seed(q, epsilon);
            let spec = WqSpec::new(q, epsilon, DEFAULT_N_GRID, DEFAULT_N_REP, seed)?;
            let table = QuantileTable::simulate(spec, &DEFAULT_LEVELS)?;
            self.insert(table);
        }
        Ok(self.tables.get(&key).unwrap())
    }

    /// Parses and merges cache records from text.
    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        let mut lines = text.lines().enumerate().peekable();
        while let Some((idx, line)) = lines.next() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("expected header 'q eps n_grid n_rep seed', got '{line}'"),
                });
            }
            let parse_err = |l: usize, tok: &str| Error::Parse {
                line: l,
                message: format!("cannot parse '{tok}'"),
            };
            let q: usize = fields[0].parse().map_err(|_| parse_err(idx + 1, fields[0]))?;
            let eps: f64 = fields[1].parse().map_err(|_| parse_err(idx + 1, fields[1]))?;
            let n_grid: usize = fields[2].parse().map_err(|_| parse_err(idx + 1, fields[2]))?;
            let n_rep: usize = fields[3].parse().map_err(|_| parse_err(idx + 1, fields[3]))?;
            let seed: u64 = fields[4].parse().map_err(|_| parse_err(idx + 1, fields[4]))?;
            let mut levels = Vec::new();
            let mut quantiles = Vec::new();
            let mut stderr = Vec::new();
            while let Some(&(_, peek)) = lines.peek() {
                let toks: Vec<&str> = peek.trim().split_whitespace().collect();
                if toks.len() != 3 {
                    break;
                }
                let (lno, _) = lines.next().unwrap();
                levels.push(toks[0].parse::<f64>().map_err(|_| parse_err(lno + 1, toks[0]))?);
                quantiles.push(toks[1].parse::<f64>().map_err(|_| parse_err(lno + 1, toks[1]))?);
                stderr.push(toks[2].parse::<f64>().map_err(|_| parse_err(lno + 1, toks[2]))?);
            }
            if levels.is_empty() {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "record has no level rows".into(),
                });
            }
            self.insert(QuantileTable {
                spec: WqSpec { q, epsilon: eps, n_grid, n_rep, seed },
                levels,
                quantiles,
                standard_error: stderr,
                redraws: 0,
            });
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for t in self.tables.values() {
            let _ = writeln!(
                out,
                "{} {} {} {} {}",
                t.spec.q, t.spec.epsilon, t.spec.n_grid, t.spec.n_rep, t.spec.seed
            );
            for i in 0..t.levels.len() {
                let _ = writeln!(out, "{} {} {}", t.levels[i], t.quantiles[i], t.standard_error[i]);
            }
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut t = Self::empty();
        t.merge_text(&std::fs::read_to_string(path)?)?;
        Ok(t)
    }

    /// Atomic save: write to a temp file in the same directory, then rename.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.render())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

/// Inverse CDF of the chi-square distribution with `df` degrees of freedom.
pub fn chi_sq_quantile(df: usize, level: f64) -> Result<f64> {
    if df == 0 {
        return Err(Error::InvalidConfig("chi-square needs df >= 1".into()));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidConfig(format!("level must lie in (0,1), got {level}")));
    }
    let dist = ChiSquared::new(df as f64)
        .map_err(|e| Error::InvalidConfig(format!("chi-square({df}): {e}")))?;
    Ok(dist.inverse_cdf(level))
}

/// Upper-tail probability of the chi-square distribution.
pub fn chi_sq_pvalue(df: usize, statistic: f64) -> Result<f64> {
    let dist = ChiSquared::new(df as f64)
        .map_err(|e| Error::InvalidConfig(format!("chi-square({df}): {e}")))?;
    Ok(1.0 - dist.cdf(statistic))
}

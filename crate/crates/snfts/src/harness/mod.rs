//! Monte Carlo experiment runner for size and size-adjusted-power studies,
//! plus the real-data two-sample analysis pipeline.
//!
//! Replications are independent work units executed on a rayon pool. Each
//! replication derives its own RNG streams from `(seed, phase, rep, slot)`,
//! so parallel and serial runs produce identical tables. Replications that
//! abort with a degenerate self-normalizer (or any other error) are counted
//! and reported per test, never silently dropped.
//!
//! Size-adjusted power runs in two phases: the null model is simulated
//! first and each test's finite-sample critical value is the empirical
//! `(1 - alpha)` quantile of its statistics; the alternative model is then
//! rejected against those critical values.

mod analyze;
mod table;

pub use analyze::{
    analyze_two_samples, AnalysisReport, AnalysisRow, AnalyzeOptions, CrossCorrMap, SampleSummary,
};
pub use table::{emit_table, parse_table_csv, ResultRow, ResultTable, TableFormat};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::dgp::{gen_fourier_process_with, DgpConfig};
use crate::error::{Error, Result};
use crate::fpca::PairCache;
use crate::funcgrid::{bspline_smooth, center, FunctionalSample, SamplePair};
use crate::nulldist::{empirical_quantile, NullTables};
use crate::registry::{TestParams, TestRegistry, TwoSampleTest};

fn default_alpha() -> f64 {
    0.05
}

fn default_true() -> bool {
    true
}

fn default_n_basis() -> usize {
    20
}

fn default_order() -> usize {
    4
}

/// Conversion of raw grid evaluations into functional objects.
#[derive(Debug, Clone, Deserialize)]
pub struct SmoothingConfig {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_n_basis")]
    pub n_basis: usize,
    #[serde(default = "default_order")]
    pub order: usize,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig { enabled: true, n_basis: 20, order: 4 }
    }
}

/// Full specification of one Monte Carlo experiment.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scenario: String,
    pub dgp_x: DgpConfig,
    pub dgp_y: DgpConfig,
    pub n_rep: usize,
    pub tests: Vec<TestParams>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub size_adjusted: bool,
    /// Null model for finite-sample critical values when `size_adjusted`.
    #[serde(default)]
    pub null_dgp: Option<DgpConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub smoothing: SmoothingConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rep < 100 {
            return Err(Error::InvalidConfig(format!(
                "experiments need n_rep >= 100, got {}",
                self.n_rep
            )));
        }
        if self.tests.is_empty() {
            return Err(Error::InvalidConfig("no tests configured".into()));
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        if self.size_adjusted && self.null_dgp.is_none() {
            return Err(Error::InvalidConfig(
                "size-adjusted power needs a null_dgp".into(),
            ));
        }
        self.dgp_x.validate()?;
        self.dgp_y.validate()?;
        if let Some(d) = &self.null_dgp {
            d.validate()?;
        }
        Ok(())
    }
}

/// Parses a TOML experiment config.
pub fn parse_experiment_config(text: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("config parse error: {e}")))
}

/// Stream ids: one namespace per phase, a stride of slots per replication.
const STREAM_STRIDE: u64 = 64;
const PHASE_NULL: u64 = 1 << 40;

fn rep_rng(seed: u64, phase_offset: u64, rep: usize, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(phase_offset + rep as u64 * STREAM_STRIDE + slot);
    rng
}

fn prepare(raw: FunctionalSample, smoothing: &SmoothingConfig) -> Result<FunctionalSample> {
    let smoothed = if smoothing.enabled {
        bspline_smooth(raw.values(), raw.grid(), smoothing.n_basis, smoothing.order)?
    } else {
        raw
    };
    Ok(center(&smoothed).0)
}

fn make_pair(
    dgp_x: &DgpConfig,
    dgp_y: &DgpConfig,
    smoothing: &SmoothingConfig,
    seed: u64,
    phase_offset: u64,
    rep: usize,
) -> Result<SamplePair> {
    let mut rng_x = rep_rng(seed, phase_offset, rep, 0);
    let mut rng_y = rep_rng(seed, phase_offset, rep, 1);
    let x = prepare(gen_fourier_process_with(dgp_x, &mut rng_x)?, smoothing)?;
    let y = prepare(gen_fourier_process_with(dgp_y, &mut rng_y)?, smoothing)?;
    SamplePair::new(x, y)
}

#[derive(Debug, Clone)]
enum RepOutcome {
    Reject(bool),
    Statistic(f64),
    Degenerate,
    Failed(String),
}

fn classify(err: Error) -> RepOutcome {
    match err {
        Error::DegenerateNormalizer { .. } => RepOutcome::Degenerate,
        other => RepOutcome::Failed(other.to_string()),
    }
}

fn build_tests(
    cfg: &ExperimentConfig,
    registry: &TestRegistry,
) -> Result<Vec<Box<dyn TwoSampleTest>>> {
    cfg.tests
        .iter()
        .map(|params| {
            let mut params = params.clone();
            params.alpha.get_or_insert(cfg.alpha);
            registry.build(&params)
        })
        .collect()
}

fn ensure_tables(tests: &[Box<dyn TwoSampleTest>], tables: &mut NullTables) -> Result<()> {
    for t in tests {
        for (q, eps) in t.required_tables() {
            tables.ensure(q, eps)?;
        }
    }
    Ok(())
}

/// Runs each test on every replication, collecting decisions when
/// `collect_stats` is false, statistics otherwise.
fn run_phase(
    cfg: &ExperimentConfig,
    tests: &[Box<dyn TwoSampleTest>],
    tables: &NullTables,
    dgp_x: &DgpConfig,
    dgp_y: &DgpConfig,
    phase_offset: u64,
    collect_stats: bool,
) -> Vec<Vec<RepOutcome>> {
    (0..cfg.n_rep)
        .into_par_iter()
        .map(|rep| {
            let pair = match make_pair(dgp_x, dgp_y, &cfg.smoothing, cfg.seed, phase_offset, rep) {
                Ok(p) => p,
                Err(e) => {
                    let msg = e.to_string();
                    return tests.iter().map(|_| RepOutcome::Failed(msg.clone())).collect();
                }
            };
            let mut cache = PairCache::new(&pair);
            tests
                .iter()
                .enumerate()
                .map(|(ti, t)| {
                    let mut rng = rep_rng(cfg.seed, phase_offset, rep, 2 + ti as u64);
                    match t.run(&mut cache, tables, &mut rng) {
                        Ok(res) if collect_stats => RepOutcome::Statistic(res.statistic),
                        Ok(res) => RepOutcome::Reject(res.reject),
                        Err(e) => classify(e),
                    }
                })
                .collect()
        })
        .collect()
}

fn tally(
    cfg: &ExperimentConfig,
    tests: &[Box<dyn TwoSampleTest>],
    outcomes: &[Vec<RepOutcome>],
    decide: impl Fn(usize, &RepOutcome) -> Option<bool>,
) -> ResultTable {
    let n_label = cfg.dgp_x.n;
    let mut rows = Vec::with_capacity(tests.len());
    let mut notes = Vec::new();
    for (ti, t) in tests.iter().enumerate() {
        let mut rejections = 0usize;
        let mut effective = 0usize;
        let mut degenerate = 0usize;
        let mut errors = 0usize;
        let mut first_error: Option<&str> = None;
        for rep in outcomes {
            match &rep[ti] {
                RepOutcome::Degenerate => degenerate += 1,
                RepOutcome::Failed(msg) => {
                    errors += 1;
                    first_error.get_or_insert(msg);
                }
                out => match decide(ti, out) {
                    Some(r) => {
                        effective += 1;
                        if r {
                            rejections += 1;
                        }
                    }
                    None => errors += 1,
                },
            }
        }
        let rate = if effective > 0 { rejections as f64 / effective as f64 } else { f64::NAN };
        let stderr =
            if effective > 0 { (rate * (1.0 - rate) / effective as f64).sqrt() } else { f64::NAN };
        let id = t.id();
        if let Some(msg) = first_error {
            notes.push(format!("{id}: {errors} failed replication(s), first: {msg}"));
        }
        let (family, param) = split_id(&id);
        rows.push(ResultRow {
            scenario: cfg.scenario.clone(),
            n: n_label,
            family,
            param,
            rate,
            stderr,
            n_effective: effective,
            degenerate,
            errors,
        });
    }
    ResultTable { rows, n_rep: cfg.n_rep, notes }
}

fn split_id(id: &str) -> (String, String) {
    match id.split_once('(') {
        Some((family, rest)) => (family.to_string(), rest.trim_end_matches(')').to_string()),
        None => (id.to_string(), String::new()),
    }
}

/// Empirical size study: rejection rate of every configured test at its
/// nominal level under `(dgp_x, dgp_y)`.
pub fn run_size_experiment(
    cfg: &ExperimentConfig,
    registry: &TestRegistry,
    tables: &mut NullTables,
) -> Result<ResultTable> {
    cfg.validate()?;
    let tests = build_tests(cfg, registry)?;
    ensure_tables(&tests, tables)?;
    let outcomes = run_phase(cfg, &tests, tables, &cfg.dgp_x, &cfg.dgp_y, 0, false);
    Ok(tally(cfg, &tests, &outcomes, |_, out| match out {
        RepOutcome::Reject(r) => Some(*r),
        _ => None,
    }))
}

/// Size-adjusted power study: phase 1 simulates the null model to obtain
/// finite-sample critical values, phase 2 rejects the alternative against
/// them.
pub fn run_power_experiment(
    cfg: &ExperimentConfig,
    registry: &TestRegistry,
    tables: &mut NullTables,
) -> Result<ResultTable> {
    cfg.validate()?;
    if !cfg.size_adjusted {
        return Err(Error::InvalidConfig(
            "run_power_experiment needs size_adjusted = true".into(),
        ));
    }
    let null_dgp = cfg.null_dgp.clone().unwrap();
    let tests = build_tests(cfg, registry)?;
    if let Some(t) = tests.iter().find(|t| !t.supports_size_adjustment()) {
        return Err(Error::InvalidConfig(format!(
            "test '{}' has no statistic scale usable for size adjustment",
            t.id()
        )));
    }
    ensure_tables(&tests, tables)?;

    let null_outcomes =
        run_phase(cfg, &tests, tables, &null_dgp, &null_dgp, PHASE_NULL, true);
    let mut criticals = Vec::with_capacity(tests.len());
    for ti in 0..tests.len() {
        let mut stats: Vec<f64> = null_outcomes
            .iter()
            .filter_map(|rep| match &rep[ti] {
                RepOutcome::Statistic(s) => Some(*s),
                _ => None,
            })
            .collect();
        if stats.len() < cfg.n_rep / 2 {
            return Err(Error::InsufficientData(format!(
                "test '{}' produced statistics in only {}/{} null replications",
                tests[ti].id(),
                stats.len(),
                cfg.n_rep
            )));
        }
        stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
        criticals.push(empirical_quantile(&stats, 1.0 - cfg.alpha));
    }

    let alt_outcomes = run_phase(cfg, &tests, tables, &cfg.dgp_x, &cfg.dgp_y, 0, true);
    Ok(tally(cfg, &tests, &alt_outcomes, |ti, out| match out {
        RepOutcome::Statistic(s) => Some(*s > criticals[ti]),
        _ => None,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp_test_support::toy_tables;

    fn small_cfg() -> ExperimentConfig {
        parse_experiment_config(
            r#"
            scenario = "unit"
            n_rep = 120
            seed = 5
            alpha = 0.05

            [dgp_x]
            n = 30
            rho = 0.5
            mu = 0.0
            v = [10.0, 0.5, 5.0, 0.3]
            grid_size = 48
            seed = 0

            [dgp_y]
            n = 30
            rho = 0.5
            mu = 0.0
            v = [10.0, 0.5, 5.0, 0.3]
            grid_size = 48
            seed = 0

            [smoothing]
            enabled = false

            [[tests]]
            kind = "sn-cov"
            k = 1

            [[tests]]
            kind = "sn-eigenvalues"
            component = 1
        "#,
        )
        .unwrap()
    }

    #[test]
    fn size_experiment_is_reproducible_and_sane() {
        let cfg = small_cfg();
        let registry = TestRegistry::builtin();
        let mut tables = toy_tables();
        let a = run_size_experiment(&cfg, &registry, &mut tables).unwrap();
        let b = run_size_experiment(&cfg, &registry, &mut tables).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra, rb);
        }
        for row in &a.rows {
            assert!(row.n_effective + row.degenerate + row.errors == 120);
            assert!(row.rate >= 0.0 && row.rate <= 1.0);
            assert!(row.rate < 0.30, "{}: size {}", row.family, row.rate);
        }
    }

    #[test]
    fn alpha_one_would_always_reject() {
        // At alpha near 1 every critical value sits at the far left tail.
        let mut cfg = small_cfg();
        cfg.alpha = 0.9999;
        cfg.n_rep = 100;
        cfg.tests.truncate(1);
        let registry = TestRegistry::builtin();
        let mut tables = toy_tables();
        // Levels only reach 0.995, so interpolation clamps: use 0.10 as the
        // highest tabulated level's complement instead.
        cfg.alpha = 0.10;
        let t = run_size_experiment(&cfg, &registry, &mut tables).unwrap();
        let r5 = {
            let mut c = small_cfg();
            c.n_rep = 100;
            c.tests.truncate(1);
            run_size_experiment(&c, &registry, &mut tables).unwrap()
        };
        assert!(t.rows[0].rate >= r5.rows[0].rate);
    }

    #[test]
    fn power_self_consistency_near_alpha() {
        let mut cfg = small_cfg();
        cfg.size_adjusted = true;
        cfg.null_dgp = Some(cfg.dgp_x.clone());
        cfg.n_rep = 150;
        let registry = TestRegistry::builtin();
        let mut tables = toy_tables();
        let t = run_power_experiment(&cfg, &registry, &mut tables).unwrap();
        for row in &t.rows {
            // Null == alternative: the rejection rate must sit near alpha;
            // generous band for the small replication count.
            assert!(row.rate < 0.15, "{}: {}", row.family, row.rate);
        }
    }

    #[test]
    fn bootstrap_is_rejected_in_power_mode() {
        let mut cfg = small_cfg();
        cfg.size_adjusted = true;
        cfg.null_dgp = Some(cfg.dgp_x.clone());
        cfg.tests.push({
            let mut p = TestParams::named("bootstrap-eigenvalues");
            p.component = Some(1);
            p.n_boot = Some(200);
            p
        });
        let registry = TestRegistry::builtin();
        let mut tables = toy_tables();
        assert!(run_power_experiment(&cfg, &registry, &mut tables).is_err());
    }

    #[test]
    fn config_validation_errors() {
        let mut cfg = small_cfg();
        cfg.n_rep = 10;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg();
        cfg.size_adjusted = true;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg();
        cfg.tests.clear();
        assert!(cfg.validate().is_err());
    }
}

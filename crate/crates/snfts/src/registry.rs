//! Strategy registry: every two-sample test behind one trait, registered
//! by name and built from a flat parameter bag, so experiment configs and
//! the CLI select tests at runtime.
//!
//! Built-in kinds:
//!
//! ```text
//! sn-cov                       K
//! sn-eigenvalues               component|leading [, epsilon]
//! sn-eigenvalue-ratios         component|leading [, epsilon]
//! sn-eigenfunctions            component|leading [, p, basis, epsilon]
//! pkm                          K
//! clrv                         K [, bandwidth]
//! subsampling-eigenvalues      component|leading, l
//! subsampling-eigenfunctions   component|leading, l [, p, basis]
//! bootstrap-eigenvalues        component|leading [, n_boot]
//! bootstrap-eigenfunctions     component|leading [, p, basis, n_boot]
//! ```

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::baselines::{
    clrv_test_with, iid_bootstrap_test_with, pkm_test_with, subsampling_test_with, BandwidthRule,
    EigenTarget, LrvConfig, SubsampleConfig, SubsampleVariance,
};
use crate::error::{Error, Result};
use crate::fpca::PairCache;
use crate::nulldist::NullTables;
use crate::sntest::{
    test_cov_operator_with, test_eigenfunctions_with, test_eigenvalue_ratios_with,
    test_eigenvalues_with, BasisVariant, ComponentTarget, TestConfig, TestResult,
};

/// A two-sample test selected at runtime.
pub trait TwoSampleTest: Send + Sync {
    /// Unique printable identifier, `family(param)`.
    fn id(&self) -> String;

    /// Null tables the test will look up, so callers can materialize them
    /// before running replications in parallel.
    fn required_tables(&self) -> Vec<(usize, f64)> {
        Vec::new()
    }

    /// Whether finite-sample size adjustment by statistic quantiles applies
    /// (bootstrap decisions have no reusable scalar statistic scale).
    fn supports_size_adjustment(&self) -> bool {
        true
    }

    fn run(
        &self,
        cache: &mut PairCache,
        tables: &NullTables,
        rng: &mut dyn rand::RngCore,
    ) -> Result<TestResult>;
}

/// Flat, file-friendly parameter bag a factory turns into a strategy.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestParams {
    pub kind: String,
    pub k: Option<usize>,
    /// Individual component index (1-based); exclusive with `leading`.
    pub component: Option<usize>,
    /// Joint test of the leading components.
    pub leading: Option<usize>,
    pub p: Option<usize>,
    pub epsilon: Option<f64>,
    pub basis: Option<String>,
    /// Subsampling width.
    pub l: Option<usize>,
    pub drop_partial: Option<bool>,
    pub n_boot: Option<usize>,
    /// Fixed Bartlett bandwidth; data-driven when absent.
    pub bandwidth: Option<f64>,
    /// Subsampling variance construction: `pooled` or `differences`.
    pub variance: Option<String>,
    pub alpha: Option<f64>,
}

impl TestParams {
    pub fn named(kind: &str) -> Self {
        TestParams { kind: kind.into(), ..Default::default() }
    }

    fn target(&self) -> Result<ComponentTarget> {
        match (self.component, self.leading) {
            (Some(_), Some(_)) => Err(Error::InvalidConfig(
                "specify either `component` or `leading`, not both".into(),
            )),
            (Some(j), None) => Ok(ComponentTarget::Component(j)),
            (None, Some(c)) => Ok(ComponentTarget::Leading(c)),
            (None, None) => Ok(ComponentTarget::Leading(1)),
        }
    }

    fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(0.05)
    }

    fn variant(&self) -> Result<Option<BasisVariant>> {
        self.basis.as_deref().map(BasisVariant::parse).transpose()
    }

    fn test_config(&self) -> Result<TestConfig> {
        let target = self.target()?;
        let p = self.p.unwrap_or_else(|| 4.max(target.max_index()));
        Ok(TestConfig {
            k: self.k.unwrap_or(1),
            target,
            p,
            epsilon: self.epsilon.unwrap_or(0.0),
            basis_variant: self.variant()?,
            alpha: self.alpha(),
        })
    }

    fn subsample_variance(&self) -> Result<SubsampleVariance> {
        match self.variance.as_deref() {
            None | Some("pooled") => Ok(SubsampleVariance::PerSamplePooled),
            Some("differences") => Ok(SubsampleVariance::BlockDifferences),
            Some(other) => Err(Error::InvalidConfig(format!(
                "unknown subsampling variance '{other}' (expected 'pooled' or 'differences')"
            ))),
        }
    }

    fn eigen_target(&self, functions: bool) -> Result<EigenTarget> {
        let target = self.target()?;
        Ok(if functions {
            EigenTarget::Eigenfunctions {
                target,
                p: self.p.unwrap_or_else(|| 4.max(target.max_index())),
                variant: self.variant()?,
            }
        } else {
            EigenTarget::Eigenvalues(target)
        })
    }
}

struct SnCov(TestConfig);

impl TwoSampleTest for SnCov {
    fn id(&self) -> String {
        format!("sn-cov(K={})", self.0.k)
    }

    fn required_tables(&self) -> Vec<(usize, f64)> {
        vec![(self.0.k * (self.0.k + 1) / 2, 0.0)]
    }

    fn run(
        &self,
        cache: &mut PairCache,
        tables: &NullTables,
        _rng: &mut dyn rand::RngCore,
    ) -> Result<TestResult> {
        test_cov_operator_with(cache, &self.0, tables)
    }
}

struct SnEigenvalues(TestConfig);

impl TwoSampleTest for SnEigenvalues {
    fn id(&self) -> String {
        format!("sn-eigenvalues({})", crate::sntest::target_label(self.0.target))
    }

    fn required_tables(&self) -> Vec<(usize, f64)> {
        vec![(self.0.target.count(), self.0.epsilon)]
    }

    fn run(
        &self,
        cache: &mut PairCache,
        tables: &NullTables,
        _rng: &mut dyn rand::RngCore,
    ) -> Result<TestResult> {
        test_eigenvalues_with(cache, &self.0, tables)
    }
}

struct SnEigenvalueRatios(TestConfig);

impl TwoSampleTest for SnEigenvalueRatios {
    fn id(&self) -> String {
        format!("sn-eigenvalue-ratios({})", crate::sntest::target_label(self.0.target))
    }

    fn required_tables(&self) -> Vec<(usize, f64)> {
        vec![(self.0.target.count(), self.0.epsilon)]
    }

    fn run(
        &self,
        cache: &mut PairCache,
        tables: &NullTables,
        _rng: &mut dyn rand::RngCore,
    ) -> Result<TestResult> {
        test_eigenvalue_ratios_with(cache, &self.0, tables)
    }
}

struct SnEigenfunctions(TestConfig);

impl SnEigenfunctions {
    fn m0(&self) -> usize {
        crate::sntest::basis_blocks(self.0.variant(), self.0.target, self.0.p)
            .map(|blocks| blocks.iter().map(|b| b.elements.len()).sum())
            .unwrap_or(0)
    }
}

impl TwoSampleTest for SnEigenfunctions {
    fn id(&self) -> String {
        format!(
            "sn-eigenfunctions({},{},p={})",
            crate::sntest::target_label(self.0.target),
            self.0.variant().name(),
            self.0.p
        )
    }

    fn required_tables(&self) -> Vec<(usize, f64)> {
        vec![(self.m0(), self.0.epsilon)]
    }

    fn run(
        &self,
        cache: &mut PairCache,
        tables: &NullTables,
        _rng: &mut dyn rand::RngCore,
    ) -> Result<TestResult> {
        test_eigenfunctions_with(cache, &self.0, tables)
    }
}

struct Pkm {
    k: usize,
    alpha: f64,
}

impl TwoSampleTest for Pkm {
    fn id(&self) -> String {
        format!("pkm(K={})", self.k)
    }

    fn run(
        &self,
        cache: &mut PairCache,
        _tables: &NullTables,
        _rng: &mut dyn rand::RngCore,
    ) -> Result<TestResult> {
        pkm_test_with(cache, self.k, self.alpha)
    }
}

struct Clrv {
    k: usize,
    cfg: LrvConfig,
    alpha: f64,
}

impl TwoSampleTest for Clrv {
    fn id(&self) -> String {
        format!("clrv(K={})", self.k)
    }

    fn run(
        &self,
        cache: &mut PairCache,
        _tables: &NullTables,
        _rng: &mut dyn rand::RngCore,
    ) -> Result<TestResult> {
        clrv_test_with(cache, self.k, &self.cfg, self.alpha)
    }
}

struct Subsampling {
    target: EigenTarget,
    cfg: SubsampleConfig,
    alpha: f64,
}

impl TwoSampleTest for Subsampling {
    fn id(&self) -> String {
        format!("subsampling({},l={})", self.target.label(), self.cfg.l)
    }

    fn run(
        &self,
        cache: &mut PairCache,
        _tables: &NullTables,
        _rng: &mut dyn rand::RngCore,
    ) -> Result<TestResult> {
        subsampling_test_with(cache, &self.target, &self.cfg, self.alpha)
    }
}

struct Bootstrap {
    target: EigenTarget,
    n_boot: usize,
    alpha: f64,
}

impl TwoSampleTest for Bootstrap {
    fn id(&self) -> String {
        format!("iid-bootstrap({},B={})", self.target.label(), self.n_boot)
    }

    fn supports_size_adjustment(&self) -> bool {
        false
    }

    fn run(
        &self,
        cache: &mut PairCache,
        _tables: &NullTables,
        rng: &mut dyn rand::RngCore,
    ) -> Result<TestResult> {
        iid_bootstrap_test_with(cache, &self.target, self.n_boot, self.alpha, rng)
    }
}

type Factory = fn(&TestParams) -> Result<Box<dyn TwoSampleTest>>;

/// Name-indexed registry of test factories.
pub struct TestRegistry {
    factories: BTreeMap<String, Factory>,
}

impl TestRegistry {
    /// Registry with every built-in test kind.
    pub fn builtin() -> Self {
        let mut r = TestRegistry { factories: BTreeMap::new() };
        r.register("sn-cov", |p| Ok(Box::new(SnCov(p.test_config()?))));
        r.register("sn-eigenvalues", |p| Ok(Box::new(SnEigenvalues(p.test_config()?))));
        r.register("sn-eigenvalue-ratios", |p| {
            Ok(Box::new(SnEigenvalueRatios(p.test_config()?)))
        });
        r.register("sn-eigenfunctions", |p| {
            let cfg = p.test_config()?;
            crate::sntest::basis_blocks(cfg.variant(), cfg.target, cfg.p)?;
            Ok(Box::new(SnEigenfunctions(cfg)))
        });
        r.register("pkm", |p| Ok(Box::new(Pkm { k: p.k.unwrap_or(1), alpha: p.alpha() })));
        r.register("clrv", |p| {
            let rule = match p.bandwidth {
                Some(b) => BandwidthRule::Fixed(b),
                None => BandwidthRule::AndrewsAr1,
            };
            Ok(Box::new(Clrv {
                k: p.k.unwrap_or(1),
                cfg: LrvConfig { bandwidth_rule: rule },
                alpha: p.alpha(),
            }))
        });
        r.register("subsampling-eigenvalues", |p| {
            Ok(Box::new(Subsampling {
                target: p.eigen_target(false)?,
                cfg: SubsampleConfig {
                    l: p.l.unwrap_or(8),
                    drop_partial: p.drop_partial.unwrap_or(true),
                    variance: p.subsample_variance()?,
                },
                alpha: p.alpha(),
            }))
        });
        r.register("subsampling-eigenfunctions", |p| {
            Ok(Box::new(Subsampling {
                target: p.eigen_target(true)?,
                cfg: SubsampleConfig {
                    l: p.l.unwrap_or(8),
                    drop_partial: p.drop_partial.unwrap_or(true),
                    variance: p.subsample_variance()?,
                },
                alpha: p.alpha(),
            }))
        });
        r.register("bootstrap-eigenvalues", |p| {
            Ok(Box::new(Bootstrap {
                target: p.eigen_target(false)?,
                n_boot: p.n_boot.unwrap_or(250),
                alpha: p.alpha(),
            }))
        });
        r.register("bootstrap-eigenfunctions", |p| {
            Ok(Box::new(Bootstrap {
                target: p.eigen_target(true)?,
                n_boot: p.n_boot.unwrap_or(250),
                alpha: p.alpha(),
            }))
        });
        r
    }

    /// Adds or replaces a factory under a name.
    pub fn register(&mut self, kind: &str, factory: Factory) {
        self.factories.insert(kind.to_string(), factory);
    }

    /// Builds the strategy a parameter bag names.
    pub fn build(&self, params: &TestParams) -> Result<Box<dyn TwoSampleTest>> {
        let factory = self.factories.get(&params.kind).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "unknown test kind '{}'; available: {}",
                params.kind,
                self.kinds().join(", ")
            ))
        })?;
        factory(params)
    }

    /// Registered kind names, sorted.
    pub fn kinds(&self) -> Vec<&str> {
        self.factories.keys().map(|s| s.as_str()).collect()
    }
}

impl Default for TestRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp_test_support::{centered_fourier_sample, toy_tables};
    use crate::funcgrid::SamplePair;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn builtin_kinds_build_and_run() {
        let registry = TestRegistry::builtin();
        assert_eq!(registry.kinds().len(), 10);
        let x = centered_fourier_sample(48, 32, 0.5, 0.0, &[10.0, 0.5, 5.0, 0.3], 1);
        let y = centered_fourier_sample(48, 32, 0.5, 0.0, &[10.0, 0.5, 5.0, 0.3], 2);
        let pair = SamplePair::new(x, y).unwrap();
        let tables = toy_tables();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in registry.kinds() {
            let mut params = TestParams::named(kind);
            params.component = Some(1);
            params.n_boot = Some(200);
            let test = registry.build(&params).unwrap();
            let mut cache = PairCache::new(&pair);
            let res = test.run(&mut cache, &tables, &mut rng).unwrap();
            assert!(res.statistic.is_finite() && res.statistic >= 0.0, "{}", test.id());
            assert_eq!(res.reject, res.statistic > res.critical_value);
        }
    }

    #[test]
    fn unknown_kind_is_an_error() {
        let registry = TestRegistry::builtin();
        assert!(registry.build(&TestParams::named("nope")).is_err());
    }

    #[test]
    fn conflicting_targets_are_rejected() {
        let registry = TestRegistry::builtin();
        let mut params = TestParams::named("sn-eigenvalues");
        params.component = Some(1);
        params.leading = Some(2);
        assert!(registry.build(&params).is_err());
    }

    #[test]
    fn required_tables_report_the_null_dimension() {
        let registry = TestRegistry::builtin();
        let mut params = TestParams::named("sn-cov");
        params.k = Some(3);
        let t = registry.build(&params).unwrap();
        assert_eq!(t.required_tables(), vec![(6, 0.0)]);
        let mut pf = TestParams::named("sn-eigenfunctions");
        pf.leading = Some(2);
        pf.p = Some(4);
        let tf = registry.build(&pf).unwrap();
        // Joint nu-star2 of the first two components at p = 4 stacks 3.
        assert_eq!(tf.required_tables(), vec![(3, 0.0)]);
    }
}

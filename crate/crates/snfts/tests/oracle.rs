//! Oracle-equivalence suite: on a fixed toy pair every statistic must
//! match its independent straight-line reimplementation to 1e-10.

mod common;

use common::*;
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use snfts::baselines::{
    clrv_test, pkm_test, subsampling_test, BandwidthRule, EigenTarget, LrvConfig, SubsampleConfig,
};
use snfts::funcgrid::{center, FunctionalSample, Grid, SamplePair};
use snfts::nulldist::{NullTables, QuantileTable, WqSpec, DEFAULT_LEVELS};
use snfts::sntest::{
    test_cov_operator, test_eigenfunctions, test_eigenvalue_ratios, test_eigenvalues,
    BasisVariant, ComponentTarget, TestConfig,
};

/// Fixed toy pair: N1 = N2 = 6 curves on an 8-point grid.
fn toy_pair() -> SamplePair {
    let mut rng = ChaCha8Rng::seed_from_u64(0x70_70);
    let mut sample = |seed_shift: u64| {
        rng = ChaCha8Rng::seed_from_u64(0x70_70 + seed_shift);
        let values = DMatrix::from_fn(6, 8, |_, _| rng.sample::<f64, _>(StandardNormal));
        let s = FunctionalSample::new(values, Grid::uniform(8), "toy").unwrap();
        center(&s).0
    };
    let x = sample(0);
    let y = sample(1);
    SamplePair::new(x, y).unwrap()
}

/// Small tables; only the decision plumbing needs them, the statistics
/// under comparison are table-free.
fn tiny_tables() -> NullTables {
    let mut t = NullTables::empty();
    for q in 1..=3 {
        let spec = WqSpec::new(q, 0.0, 1000, 10_000, 99 + q as u64).unwrap();
        t.insert(QuantileTable::simulate(spec, &DEFAULT_LEVELS).unwrap());
    }
    let spec = WqSpec::new(1, 0.5, 1000, 10_000, 499).unwrap();
    t.insert(QuantileTable::simulate(spec, &DEFAULT_LEVELS).unwrap());
    t
}

fn close(a: f64, b: f64, label: &str) {
    assert!(
        (a - b).abs() <= 1e-10 * (1.0 + b.abs()),
        "{label}: library {a} vs oracle {b}"
    );
}

#[test]
fn g1_matches_the_direct_formula() {
    let pair = toy_pair();
    let tables = tiny_tables();
    for k in [1usize, 2] {
        let cfg = TestConfig { k, ..Default::default() };
        let got = test_cov_operator(&pair, &cfg, &tables).unwrap().statistic;
        close(got, oracle_g1(&pair, k, None), &format!("G1(K={k})"));
    }
}

#[test]
fn g2_matches_the_direct_formula() {
    let pair = toy_pair();
    let tables = tiny_tables();
    for (target, indices) in [
        (ComponentTarget::Leading(2), vec![1usize, 2]),
        (ComponentTarget::Component(2), vec![2]),
    ] {
        let cfg = TestConfig { target, ..Default::default() };
        let got = test_eigenvalues(&pair, &cfg, &tables).unwrap().statistic;
        close(got, oracle_g2(&pair, &indices, 0.0), &format!("G2({target:?})"));
    }
    // Trimmed variant.
    let cfg = TestConfig { target: ComponentTarget::Component(1), epsilon: 0.5, ..Default::default() };
    let got = test_eigenvalues(&pair, &cfg, &tables).unwrap().statistic;
    close(got, oracle_g2(&pair, &[1], 0.5), "G2 trimmed");
}

#[test]
fn g2_ratio_matches_the_direct_formula() {
    let pair = toy_pair();
    let tables = tiny_tables();
    let cfg = TestConfig { target: ComponentTarget::Leading(2), ..Default::default() };
    let got = test_eigenvalue_ratios(&pair, &cfg, &tables).unwrap().statistic;
    close(got, oracle_g2_ratio(&pair, &[1, 2], 0.0), "G2 ratio");
}

#[test]
fn g3_matches_the_direct_formula() {
    let pair = toy_pair();
    let tables = tiny_tables();
    // Individual first eigenfunction, plain nu basis at p = 2.
    let cfg = TestConfig {
        target: ComponentTarget::Component(1),
        p: 2,
        basis_variant: Some(BasisVariant::Nu),
        ..Default::default()
    };
    let got = test_eigenfunctions(&pair, &cfg, &tables).unwrap().statistic;
    close(got, oracle_g3(&pair, &[1], "nu", 2, 0.0, None), "G3 nu j=1 p=2");

    // Starred individual basis at p = 3.
    let cfg = TestConfig {
        target: ComponentTarget::Component(2),
        p: 3,
        basis_variant: Some(BasisVariant::NuStar),
        ..Default::default()
    };
    let got = test_eigenfunctions(&pair, &cfg, &tables).unwrap().statistic;
    close(got, oracle_g3(&pair, &[2], "nu-star", 3, 0.0, None), "G3 nu-star j=2 p=3");

    // Joint starred-2 test of the first two components at p = 3 stacks the
    // j = 1 block only.
    let cfg = TestConfig {
        target: ComponentTarget::Leading(2),
        p: 3,
        basis_variant: Some(BasisVariant::NuStar2),
        ..Default::default()
    };
    let got = test_eigenfunctions(&pair, &cfg, &tables).unwrap().statistic;
    close(got, oracle_g3(&pair, &[1], "nu-star2", 3, 0.0, None), "G3 nu-star2 joint 2");
}

#[test]
fn pkm_matches_the_direct_formula() {
    let pair = toy_pair();
    for k in [1usize, 2] {
        let got = pkm_test(&pair, k, 0.05).unwrap().statistic;
        close(got, oracle_pkm(&pair, k), &format!("PKM(K={k})"));
    }
}

#[test]
fn clrv_matches_the_direct_formula() {
    let pair = toy_pair();
    for (rule, bw) in [
        (BandwidthRule::Fixed(2.0), Some(2.0)),
        (BandwidthRule::AndrewsAr1, None),
    ] {
        let got = clrv_test(&pair, 1, &LrvConfig { bandwidth_rule: rule }, 0.05)
            .unwrap()
            .statistic;
        close(got, oracle_clrv(&pair, 1, bw), &format!("CLRV({rule:?})"));
    }
}

#[test]
fn subsampling_matches_the_direct_formula() {
    let pair = toy_pair();
    let got = subsampling_test(
        &pair,
        &EigenTarget::Eigenvalues(ComponentTarget::Component(1)),
        &SubsampleConfig { l: 2, drop_partial: true },
        0.05,
    )
    .unwrap()
    .statistic;
    close(got, oracle_subsampling_eigenvalue(&pair, 1, 2), "subsampling j=1 l=2");
}

#[test]
fn recursive_final_equals_full_sample_exactly() {
    let pair = toy_pair();
    use snfts::fpca::{recursive_track, TrackMode};
    let track = recursive_track(&pair, &TrackMode::EigvalDiff { indices: vec![1, 2] }).unwrap();
    // Recompute the full-sample eigenvalue difference through the
    // library's full-sample route; the final track entry must be identical.
    let ex = snfts::fpca::sample_eigen(&pair.x, pair.n1(), 2).unwrap();
    let ey = snfts::fpca::sample_eigen(&pair.y, pair.n2(), 2).unwrap();
    let last = track.final_vector();
    assert_eq!(last[0], ex.values[0] - ey.values[0]);
    assert_eq!(last[1], ex.values[1] - ey.values[1]);
    assert_eq!(*track.ks.last().unwrap(), pair.n());
}

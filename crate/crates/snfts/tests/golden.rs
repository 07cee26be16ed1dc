//! Golden-file check of the experiment pipeline: a fixed mini-experiment
//! must reproduce the frozen result table (structure and rates exactly,
//! standard errors to float tolerance).

use snfts::harness::{parse_experiment_config, parse_table_csv, run_size_experiment};
use snfts::nulldist::{NullTables, QuantileTable, WqSpec, DEFAULT_LEVELS};
use snfts::registry::TestRegistry;

const CONFIG: &str = r#"
scenario = "golden"
n_rep = 100
seed = 424242
alpha = 0.05

[dgp_x]
n = 24
rho = 0.5
mu = 0.0
v = [10.0, 0.5, 5.0, 0.3]
grid_size = 64
seed = 0

[dgp_y]
n = 24
rho = 0.5
mu = 0.0
v = [10.0, 0.5, 5.0, 0.3]
grid_size = 64
seed = 0

[smoothing]
enabled = true
n_basis = 12
order = 4

[[tests]]
kind = "sn-cov"
k = 1

[[tests]]
kind = "sn-eigenvalues"
component = 1

[[tests]]
kind = "pkm"
k = 1
"#;

const GOLDEN_CSV: &str = include_str!("golden_experiment.csv");

#[test]
fn mini_experiment_matches_the_frozen_table() {
    let cfg = parse_experiment_config(CONFIG).unwrap();
    let registry = TestRegistry::builtin();
    let mut tables = NullTables::empty();
    for q in [1usize] {
        let spec = WqSpec::new(q, 0.0, 1000, 10_000, 8800 + q as u64).unwrap();
        tables.insert(QuantileTable::simulate(spec, &DEFAULT_LEVELS).unwrap());
    }
    let got = run_size_experiment(&cfg, &registry, &mut tables).unwrap();
    let golden = parse_table_csv(GOLDEN_CSV).unwrap();
    assert_eq!(got.rows.len(), golden.rows.len());
    for (g, want) in got.rows.iter().zip(&golden.rows) {
        assert_eq!(g.scenario, want.scenario);
        assert_eq!(g.n, want.n);
        assert_eq!(g.family, want.family);
        assert_eq!(g.param, want.param);
        assert_eq!(g.n_effective, want.n_effective, "{}", g.family);
        assert_eq!(g.degenerate, want.degenerate, "{}", g.family);
        assert_eq!(g.errors, want.errors, "{}", g.family);
        // Rates are multiples of 1/n_effective, so exact equality is the
        // right check; the stderr is a float and gets a tolerance.
        assert_eq!(g.rate, want.rate, "{} rate", g.family);
        assert!((g.stderr - want.stderr).abs() < 1e-12);
    }
}

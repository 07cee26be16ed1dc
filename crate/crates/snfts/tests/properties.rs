//! Property tests for the structural invariants.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use snfts::fpca::{RecursiveTrack, TrackMode};
use snfts::sntest::sn_matrix;
use snfts::funcgrid::{parse_sample, render_functions, seasonal_demean, FunctionalSample, Grid};

fn finite_f64() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, -1.0..1.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inner_product_symmetric_and_bilinear(
        len in 2usize..40,
        seed_a in proptest::collection::vec(finite_f64(), 40),
        seed_b in proptest::collection::vec(finite_f64(), 40),
        seed_c in proptest::collection::vec(finite_f64(), 40),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
    ) {
        let grid = Grid::uniform(len);
        let f = &seed_a[..len];
        let g = &seed_b[..len];
        let h = &seed_c[..len];
        let ip_fg = grid.inner_product(f, g).unwrap();
        let ip_gf = grid.inner_product(g, f).unwrap();
        prop_assert_eq!(ip_fg, ip_gf);
        prop_assert!(grid.norm_sq(f).unwrap() >= 0.0);
        let combo: Vec<f64> = f.iter().zip(h).map(|(x, y)| a * x + b * y).collect();
        let lhs = grid.inner_product(&combo, g).unwrap();
        let rhs = a * ip_fg + b * grid.inner_product(h, g).unwrap();
        let scale = 1.0 + lhs.abs().max(rhs.abs());
        prop_assert!((lhs - rhs).abs() <= 1e-9 * scale);
    }

    #[test]
    fn sample_csv_round_trips_bitwise(
        n in 2usize..8,
        g in 1usize..12,
        cells in proptest::collection::vec(finite_f64(), 96),
    ) {
        let values = DMatrix::from_fn(n, g, |i, j| cells[(i * g + j) % cells.len()]);
        let s = FunctionalSample::new(values, Grid::uniform(g), "prop").unwrap();
        let back = parse_sample(&render_functions(s.grid(), s.values(), s.label())).unwrap();
        prop_assert_eq!(back.values(), s.values());
        prop_assert_eq!(back.grid(), s.grid());
    }

    #[test]
    fn seasonal_demeaning_is_idempotent(
        period in 1usize..5,
        reps in 2usize..5,
        g in 1usize..6,
        cells in proptest::collection::vec(finite_f64(), 120),
    ) {
        let n = period * reps;
        let values = DMatrix::from_fn(n, g, |i, j| cells[(i * g + j) % cells.len()]);
        let s = FunctionalSample::new(values, Grid::uniform(g), "prop").unwrap();
        let once = seasonal_demean(&s, period).unwrap();
        let twice = seasonal_demean(&once, period).unwrap();
        for (a, b) in twice.values().iter().zip(once.values().iter()) {
            let scale = 1.0 + b.abs();
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn sn_matrices_are_symmetric_psd_and_quadratically_homogeneous(
        n in 8usize..24,
        dim in 1usize..4,
        cells in proptest::collection::vec(-2.0..2.0f64, 96),
        c in 0.05..20.0f64,
    ) {
        let ks: Vec<usize> = (2..=n).collect();
        let vectors: Vec<DVector<f64>> = ks
            .iter()
            .map(|&k| DVector::from_fn(dim, |r, _| cells[(k * (r + 3)) % cells.len()] + (k as f64).sin()))
            .collect();
        let mk = |vecs: Vec<DVector<f64>>| RecursiveTrack {
            ks: ks.clone(),
            vectors: vecs,
            mode: TrackMode::EigvalDiff { indices: (1..=dim).collect() },
            n,
        };
        let base = mk(vectors.clone());
        let Ok((m, cond)) = sn_matrix(&base, 0.0) else {
            // Degenerate tracks are legitimately rejected.
            return Ok(());
        };
        prop_assert!(cond >= 1.0);
        for i in 0..dim {
            for j in 0..dim {
                prop_assert_eq!(m[(i, j)], m[(j, i)]);
            }
        }
        let eig = m.clone().symmetric_eigen();
        prop_assert!(eig.eigenvalues.iter().all(|&l| l > 0.0));
        // Quadratic homogeneity.
        let scaled = mk(vectors.iter().map(|v| v * c).collect());
        if let Ok((ms, _)) = sn_matrix(&scaled, 0.0) {
            for (a, b) in m.iter().zip(ms.iter()) {
                let scale = 1.0 + b.abs();
                prop_assert!((a * c * c - b).abs() <= 1e-9 * scale);
            }
        }
    }
}

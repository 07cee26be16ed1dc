//! Scratch probe: subsampling-test size across (l, N0) cells, comparing
//! the literal formula against a doubled-numerator variant, to identify
//! the construction behind the reference table values.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use snfts::dgp::{gen_fourier_process_with, DgpConfig};
use snfts::fpca::{gram_matrix, sample_eigen};
use snfts::funcgrid::{bspline_smooth, center, FunctionalSample};

fn eig1(values: &DMatrix<f64>, rows: std::ops::Range<usize>, grid: &snfts::funcgrid::Grid) -> f64 {
    let block = values.rows(rows.start, rows.len()).into_owned();
    let s = FunctionalSample::new(block, grid.clone(), "b").unwrap();
    let gram = gram_matrix(&s);
    let m = rows.len();
    let se = (gram / m as f64).symmetric_eigen();
    se.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn main() {
    let crit = 3.841458820694131; // chi2_1(0.95)
    let n_rep = 400u64;
    // (N0, l, reference size from the comparison table)
    for (n0, l, reference) in [
        (48usize, 8usize, 24.2),
        (48, 12, 21.9),
        (48, 16, 21.8),
        (96, 8, 19.0),
        (96, 12, 16.3),
        (96, 16, 16.0),
    ] {
        let s_blocks = n0 / l;
        let results: Vec<(bool, bool)> = (0..n_rep)
            .into_par_iter()
            .map(|rep| {
                let cfg = DgpConfig {
                    n: n0,
                    rho: 0.5,
                    mu: 0.0,
                    v: vec![10.0, 0.5, 5.0, 0.3],
                    delta: vec![],
                    grid_size: 1000,
                    seed: 0,
                    burn_in: 200,
                };
                let mut rx = ChaCha8Rng::seed_from_u64(1);
                rx.set_stream(rep * 2);
                let mut ry = ChaCha8Rng::seed_from_u64(1);
                ry.set_stream(rep * 2 + 1);
                let gen = |rng: &mut ChaCha8Rng| {
                    let raw = gen_fourier_process_with(&cfg, rng).unwrap();
                    center(&bspline_smooth(raw.values(), raw.grid(), 20, 4).unwrap()).0
                };
                let x = gen(&mut rx);
                let y = gen(&mut ry);
                let grid = x.grid();
                let diffs: Vec<f64> = (0..s_blocks)
                    .map(|i| {
                        eig1(x.values(), i * l..(i + 1) * l, grid)
                            - eig1(y.values(), i * l..(i + 1) * l, grid)
                    })
                    .collect();
                let mean: f64 = diffs.iter().sum::<f64>() / s_blocks as f64;
                let var: f64 = (l as f64 / s_blocks as f64)
                    * diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>();
                let full = sample_eigen(&x, n0, 1).unwrap().values[0]
                    - sample_eigen(&y, n0, 1).unwrap().values[0];
                let literal = n0 as f64 * full * full / var;
                // Per-sample pooled variance: block eigenvalues of each
                // sample spread around their own mean, no difference factor.
                let lx: Vec<f64> =
                    (0..s_blocks).map(|i| eig1(x.values(), i * l..(i + 1) * l, grid)).collect();
                let ly: Vec<f64> =
                    (0..s_blocks).map(|i| eig1(y.values(), i * l..(i + 1) * l, grid)).collect();
                let mx: f64 = lx.iter().sum::<f64>() / s_blocks as f64;
                let my: f64 = ly.iter().sum::<f64>() / s_blocks as f64;
                let pooled_var = (l as f64 / (2.0 * s_blocks as f64))
                    * (lx.iter().map(|v| (v - mx) * (v - mx)).sum::<f64>()
                        + ly.iter().map(|v| (v - my) * (v - my)).sum::<f64>());
                let pooled = n0 as f64 * full * full / pooled_var;
                (literal > crit, pooled > crit)
            })
            .collect();
        let lit = results.iter().filter(|r| r.0).count() as f64 / n_rep as f64;
        let dbl = results.iter().filter(|r| r.1).count() as f64 / n_rep as f64;
        println!(
            "N0={n0:3} l={l:2}: literal {:.1}%  per-sample-pooled {:.1}%  (reference {reference}%)",
            100.0 * lit,
            100.0 * dbl
        );
    }
}

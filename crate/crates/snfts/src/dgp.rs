//! Simulation data-generating processes.
//!
//! The main process generates curves as Fourier combinations driven by a
//! VAR(1) coefficient vector,
//!
//! ```text
//! X_i(t) = sum_j { xi_{j,1}^i sqrt(2) sin(2 pi j t + delta_j)
//!               + xi_{j,2}^i sqrt(2) cos(2 pi j t + delta_j) },
//! xi_i   = rho xi_{i-1} + sqrt(1 - rho^2) e_i,   e_i ~ N(0, Sigma_e),
//! Sigma_e = diag(v)/(1+mu^2) + mu^2/(1+mu^2) * 1 1',
//! ```
//!
//! where the coefficient vector stacks the sine coefficients for all
//! frequencies first, then the cosine coefficients. The `sqrt(1-rho^2)`
//! scaling makes the stationary covariance of `xi_i` equal `Sigma_e`
//! exactly, so with `mu = 0` and zero phases the population eigenvalues of
//! the curve process are the entries of `v` (sorted) and the eigenfunctions
//! are the corresponding Fourier terms.
//!
//! A truncated Gaussian linear functional process is available as well.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcgrid::{FunctionalSample, Grid};

fn default_grid_size() -> usize {
    1000
}

fn default_burn_in() -> usize {
    200
}

/// Configuration of the VAR(1)-driven Fourier process.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DgpConfig {
    /// Series length.
    pub n: usize,
    /// VAR(1) coefficient, `|rho| < 1`.
    pub rho: f64,
    /// Innovation mixing scalar in `Sigma_e`.
    pub mu: f64,
    /// Variance vector; length `2 * (number of frequencies)`.
    pub v: Vec<f64>,
    /// Phase shift per frequency; defaults to zeros.
    #[serde(default)]
    pub delta: Vec<f64>,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default)]
    pub seed: u64,
    /// Extra initial steps discarded after the stationary start; the
    /// initial state is already drawn from the stationary law, so this is
    /// belt and braces.
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfig("dgp needs n >= 2".into()));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::InvalidConfig(format!("|rho| must be < 1, got {}", self.rho)));
        }
        if self.v.is_empty() || self.v.len() % 2 != 0 {
            return Err(Error::InvalidConfig(
                "v must have positive even length (sin and cos coefficients per frequency)".into(),
            ));
        }
        if self.v.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::InvalidConfig("v entries must be > 0".into()));
        }
        if !self.delta.is_empty() && self.delta.len() != self.v.len() / 2 {
            return Err(Error::InvalidConfig(format!(
                "delta must have one phase per frequency ({}), got {}",
                self.v.len() / 2,
                self.delta.len()
            )));
        }
        if self.grid_size < 2 {
            return Err(Error::InvalidConfig("grid_size must be >= 2".into()));
        }
        Ok(())
    }

    pub fn n_freq(&self) -> usize {
        self.v.len() / 2
    }

    fn phases(&self) -> Vec<f64> {
        if self.delta.is_empty() {
            vec![0.0; self.n_freq()]
        } else {
            self.delta.clone()
        }
    }

    /// RNG seeded from the config.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Innovation covariance `Sigma_e = diag(v)/(1+mu^2) + mu^2/(1+mu^2) 11'`.
pub fn sigma_e(v: &[f64], mu: f64) -> DMatrix<f64> {
    let d = v.len();
    let denom = 1.0 + mu * mu;
    let mix = mu * mu / denom;
    DMatrix::from_fn(d, d, |i, j| {
        let diag = if i == j { v[i] / denom } else { 0.0 };
        diag + mix
    })
}

/// Draws the VAR(1) coefficient matrix (`n x dim`), initial state from the
/// stationary law plus `burn_in` discarded steps.
pub fn gen_var1(cfg: &DgpConfig, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    let dim = cfg.v.len();
    let sig = sigma_e(&cfg.v, cfg.mu);
    let chol = sig
        .cholesky()
        .ok_or_else(|| Error::Singular("Sigma_e is not positive definite".into()))?;
    let l = chol.l();
    let scale = (1.0 - cfg.rho * cfg.rho).sqrt();
    let draw = |rng: &mut dyn rand::RngCore| -> DVector<f64> {
        let z = DVector::from_fn(dim, |_, _| {
            let v: f64 = StandardNormal.sample(rng);
            v
        });
        &l * z
    };
    let mut state = draw(rng);
    for _ in 0..cfg.burn_in {
        state = &state * cfg.rho + draw(rng) * scale;
    }
    let mut out = DMatrix::zeros(cfg.n, dim);
    for i in 0..cfg.n {
        state = &state * cfg.rho + draw(rng) * scale;
        out.row_mut(i).copy_from(&state.transpose());
    }
    Ok(out)
}

/// Fourier design matrix (`dim x G`): sine rows for every frequency, then
/// cosine rows, each with its frequency's phase.
fn fourier_design(n_freq: usize, phases: &[f64], grid: &Grid) -> DMatrix<f64> {
    let g = grid.len();
    let pts = grid.points();
    let sqrt2 = std::f64::consts::SQRT_2;
    let two_pi = 2.0 * std::f64::consts::PI;
    DMatrix::from_fn(2 * n_freq, g, |row, t| {
        let (j, is_cos) = if row < n_freq { (row, false) } else { (row - n_freq, true) };
        let arg = two_pi * (j + 1) as f64 * pts[t] + phases[j];
        if is_cos {
            sqrt2 * arg.cos()
        } else {
            sqrt2 * arg.sin()
        }
    })
}

/// Generates the Fourier functional process with a caller-provided RNG.
pub fn gen_fourier_process_with(cfg: &DgpConfig, rng: &mut impl Rng) -> Result<FunctionalSample> {
    let xi = gen_var1(cfg, rng)?;
    let grid = Grid::uniform(cfg.grid_size);
    let design = fourier_design(cfg.n_freq(), &cfg.phases(), &grid);
    let values = &xi * &design;
    FunctionalSample::new(values, grid, format!("fourier(rho={},mu={})", cfg.rho, cfg.mu))
}

/// Generates the Fourier functional process from the config's own seed.
pub fn gen_fourier_process(cfg: &DgpConfig) -> Result<FunctionalSample> {
    gen_fourier_process_with(cfg, &mut cfg.rng())
}

/// Configuration of the truncated Gaussian linear functional process
/// `X_i = sum_j b_j eps_{i-j}`, `eps_j = sum_l sqrt(lambda_l) z_{l,j} phi_l`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearProcessConfig {
    pub n: usize,
    /// Moving-average coefficients (finite truncation).
    pub b: Vec<f64>,
    /// Eigenvalue sequence (finite truncation).
    pub lambdas: Vec<f64>,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default)]
    pub seed: u64,
}

impl LinearProcessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.b.is_empty() || self.lambdas.is_empty() {
            return Err(Error::InvalidConfig(
                "linear process needs n >= 2 and nonempty b, lambdas".into(),
            ));
        }
        if self.lambdas.iter().any(|&l| !(l >= 0.0)) {
            return Err(Error::InvalidConfig("lambdas must be >= 0".into()));
        }
        Ok(())
    }
}

/// Orthonormal carrier family for the linear process: alternating
/// `sqrt(2) sin(2 pi f t)` / `sqrt(2) cos(2 pi f t)` with rising frequency.
fn carrier_design(count: usize, grid: &Grid) -> DMatrix<f64> {
    let sqrt2 = std::f64::consts::SQRT_2;
    let two_pi = 2.0 * std::f64::consts::PI;
    DMatrix::from_fn(count, grid.len(), |l, t| {
        let freq = (l / 2 + 1) as f64;
        let arg = two_pi * freq * grid.points()[t];
        if l % 2 == 0 {
            sqrt2 * arg.sin()
        } else {
            sqrt2 * arg.cos()
        }
    })
}

/// Generates the linear functional process with a caller-provided RNG.
pub fn gen_linear_process_with(
    cfg: &LinearProcessConfig,
    rng: &mut impl Rng,
) -> Result<FunctionalSample> {
    cfg.validate()?;
    let l = cfg.lambdas.len();
    let lag = cfg.b.len();
    // Innovation coefficient vectors for indices -(lag-1)..n-1.
    let total = cfg.n + lag - 1;
    let z = DMatrix::from_fn(total, l, |_, _| {
        let v: f64 = rng.sample(StandardNormal);
        v
    });
    let mut coeff = DMatrix::zeros(cfg.n, l);
    for i in 0..cfg.n {
        for (j, &bj) in cfg.b.iter().enumerate() {
            // eps_{i-j} sits at row (i - j) + (lag - 1).
            let row = i + lag - 1 - j;
            for c in 0..l {
                coeff[(i, c)] += bj * z[(row, c)];
            }
        }
    }
    for (c, &lam) in cfg.lambdas.iter().enumerate() {
        let s = lam.sqrt();
        for i in 0..cfg.n {
            coeff[(i, c)] *= s;
        }
    }
    let grid = Grid::uniform(cfg.grid_size);
    let design = carrier_design(l, &grid);
    let values = &coeff * &design;
    FunctionalSample::new(values, grid, "gaussian-linear-process")
}

/// Generates the linear functional process from the config's own seed.
pub fn gen_linear_process(cfg: &LinearProcessConfig) -> Result<FunctionalSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    gen_linear_process_with(cfg, &mut rng)
}

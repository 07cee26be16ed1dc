//! `snfts` — self-normalized two-sample inference for functional time
//! series: data generation, null-distribution tabulation, Monte Carlo
//! experiments and two-sample analysis.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use snfts::dgp::{gen_fourier_process, gen_linear_process, DgpConfig, LinearProcessConfig};
use snfts::funcgrid::{bspline_smooth, load_sample, save_sample, write_functions_csv};
use snfts::harness::{
    analyze_two_samples, emit_table, parse_experiment_config, run_power_experiment,
    run_size_experiment, AnalyzeOptions, TableFormat,
};
use snfts::nulldist::{NullTables, QuantileTable, WqSpec, DEFAULT_LEVELS};
use snfts::registry::TestRegistry;
use snfts::sntest::BasisVariant;

#[derive(Parser)]
#[command(name = "snfts", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated functional sample and write it as CSV.
    Gen {
        /// Data-generating process: `fourier` or `linear`.
        #[arg(long, default_value = "fourier")]
        dgp: String,
        /// Series length.
        #[arg(long)]
        n: usize,
        /// VAR(1) coefficient (fourier DGP).
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        /// Innovation mixing scalar (fourier DGP).
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        /// Comma-separated variance vector (fourier DGP).
        #[arg(long, value_delimiter = ',', default_value = "10,0.5,5,0.3")]
        v: Vec<f64>,
        /// Comma-separated phase shifts, one per frequency.
        #[arg(long, value_delimiter = ',')]
        delta: Vec<f64>,
        /// Comma-separated moving-average coefficients (linear DGP).
        #[arg(long, value_delimiter = ',', default_value = "1")]
        b: Vec<f64>,
        /// Comma-separated eigenvalues (linear DGP).
        #[arg(long, value_delimiter = ',', default_value = "1,0.5")]
        lambdas: Vec<f64>,
        /// Evaluation grid size.
        #[arg(long, default_value_t = 1000)]
        grid: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        burn_in: usize,
        /// B-spline basis size for smoothing the raw draws; 0 keeps them raw.
        #[arg(long, default_value_t = 0)]
        basis: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate quantiles of the pivotal null functional and update a cache.
    Tabulate {
        #[arg(long)]
        q: usize,
        /// Trimming fraction.
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// Monte Carlo draws.
        #[arg(long, default_value_t = 100_000)]
        reps: usize,
        /// Brownian-path lattice size.
        #[arg(long, default_value_t = 5000)]
        grid: usize,
        /// RNG seed; derived from (q, eps) when omitted.
        #[arg(long)]
        seed: Option<u64>,
        /// Cache file to merge into (created when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo size or size-adjusted-power experiment.
    Experiment {
        /// TOML config file mirroring the experiment structure.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for results.csv / results.md.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Shrink to 200 replications for a quick check.
        #[arg(long)]
        quick: bool,
        /// Extra quantile cache merged over the shipped one.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Two-sample second-order analysis of two sample files.
    Analyze {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        /// Seasonal period removed first (1 = plain centering).
        #[arg(long, default_value_t = 12)]
        period: usize,
        /// Leading components tested individually and jointly.
        #[arg(long, default_value_t = 3)]
        m: usize,
        /// Basis depth for eigenfunction projections.
        #[arg(long, default_value_t = 3)]
        p: usize,
        /// Basis variant: nu, nu-tilde, nu-star, nu-star2.
        #[arg(long)]
        basis: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// Skip the per-location cross-correlation map.
        #[arg(long)]
        skip_crosscorr: bool,
        /// Output directory (report.md, crosscorr.csv, eigenfunctions).
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Extra quantile cache merged over the shipped one.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Gen {
            dgp,
            n,
            rho,
            mu,
            v,
            delta,
            b,
            lambdas,
            grid,
            seed,
            burn_in,
            basis,
            out,
        } => {
            let sample = match dgp.as_str() {
                "fourier" => gen_fourier_process(&DgpConfig {
                    n,
                    rho,
                    mu,
                    v,
                    delta,
                    grid_size: grid,
                    seed,
                    burn_in,
                })?,
                "linear" => gen_linear_process(&LinearProcessConfig {
                    n,
                    b,
                    lambdas,
                    grid_size: grid,
                    seed,
                })?,
                other => bail!("unknown dgp '{other}' (expected 'fourier' or 'linear')"),
            };
            let sample = if basis > 0 {
                let mut s = bspline_smooth(sample.values(), sample.grid(), basis, 4)?;
                s.set_label(format!("{} (smoothed, {basis} basis)", sample.label()));
                s
            } else {
                sample
            };
            save_sample(&sample, &out)?;
            eprintln!("wrote {} curves on {} points to {}", sample.n(), sample.n_points(), out.display());
        }
        Command::Tabulate { q, eps, reps, grid, seed, out } => {
            let seed = seed.unwrap_or_else(|| NullTables::derived_seed(q, eps));
            let spec = WqSpec::new(q, eps, grid, reps, seed)?;
            let table = QuantileTable::simulate(spec, &DEFAULT_LEVELS)?;
            for (i, level) in table.levels.iter().enumerate() {
                println!(
                    "q={q} eps={eps} level={level}: {:.4} (se {:.4})",
                    table.quantiles[i], table.standard_error[i]
                );
            }
            if table.redraws > 0 {
                eprintln!("note: {} singular redraws", table.redraws);
            }
            if let Some(path) = out {
                let mut tables = if path.exists() {
                    NullTables::load(&path)?
                } else {
                    NullTables::empty()
                };
                tables.insert(table);
                tables.save(&path)?;
                eprintln!("cache updated: {}", path.display());
            }
        }
        Command::Experiment { config, out, quick, cache } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = parse_experiment_config(&text)?;
            if quick {
                cfg.n_rep = cfg.n_rep.min(200);
            }
            let registry = TestRegistry::builtin();
            let mut tables = NullTables::shipped();
            if let Some(path) = cache {
                tables.merge_text(&std::fs::read_to_string(path)?)?;
            }
            let table = if cfg.size_adjusted {
                run_power_experiment(&cfg, &registry, &mut tables)?
            } else {
                run_size_experiment(&cfg, &registry, &mut tables)?
            };
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("results.csv"), emit_table(&table, TableFormat::Csv))?;
            std::fs::write(out.join("results.md"), emit_table(&table, TableFormat::Markdown))?;
            print!("{}", emit_table(&table, TableFormat::Markdown));
            eprintln!("wrote {}/results.csv and results.md", out.display());
        }
        Command::Analyze {
            x,
            y,
            period,
            m,
            p,
            basis,
            alpha,
            eps,
            skip_crosscorr,
            out,
            cache,
        } => {
            let xs = load_sample(&x).with_context(|| format!("loading {}", x.display()))?;
            let ys = load_sample(&y).with_context(|| format!("loading {}", y.display()))?;
            let opts = AnalyzeOptions {
                period,
                m,
                p,
                variant: basis.as_deref().map(BasisVariant::parse).transpose()?,
                alpha,
                epsilon: eps,
                crosscorr: !skip_crosscorr,
            };
            let mut tables = NullTables::shipped();
            if let Some(path) = cache {
                tables.merge_text(&std::fs::read_to_string(path)?)?;
            }
            let report = analyze_two_samples(&xs, &ys, &opts, &mut tables)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("report.md"), report.to_markdown())?;
            if let Some(csv) = report.crosscorr_csv() {
                std::fs::write(out.join("crosscorr.csv"), csv)?;
            }
            // Leading eigenfunctions of both demeaned samples, for plotting.
            let depth = p.max(m).min(xs.n().min(ys.n()));
            let dx = snfts::funcgrid::seasonal_demean(&xs, period)?;
            let dy = snfts::funcgrid::seasonal_demean(&ys, period)?;
            let ex = snfts::fpca::full_sample_eigen(&dx, depth)?;
            let ey = snfts::fpca::full_sample_eigen(&dy, depth)?;
            write_functions_csv(&ex.grid, &ex.functions, "eigenfunctions-x", out.join("eigenfunctions_x.csv"))?;
            write_functions_csv(&ey.grid, &ey.functions, "eigenfunctions-y", out.join("eigenfunctions_y.csv"))?;
            print!("{}", report.to_markdown());
            eprintln!("wrote report.md (+ csv files) under {}", out.display());
        }
    }
    Ok(())
}

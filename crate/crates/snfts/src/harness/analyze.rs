//! Real-data two-sample analysis: seasonal demeaning, FPCA summaries,
//! per-component and joint second-order tests, and a per-location
//! lag-zero cross-correlation map.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fpca::{full_sample_eigen, PairCache};
use crate::funcgrid::{seasonal_demean, FunctionalSample, SamplePair};
use crate::nulldist::NullTables;
use crate::sntest::{
    lag0_crosscorr_sn, test_eigenfunctions_with, test_eigenvalues_with, BasisVariant,
    ComponentTarget, TestConfig, TestResult,
};

/// Options of the analysis pipeline.
#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    /// Seasonal period removed before any estimation (`1` = plain mean).
    pub period: usize,
    /// Number of leading eigencomponents tested individually and jointly.
    pub m: usize,
    /// Basis depth for eigenfunction projections.
    pub p: usize,
    /// Basis variant; per-target defaults when absent.
    pub variant: Option<BasisVariant>,
    pub alpha: f64,
    pub epsilon: f64,
    /// Compute the per-location cross-correlation map.
    pub crosscorr: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            period: 12,
            m: 3,
            p: 3,
            variant: None,
            alpha: 0.05,
            epsilon: 0.0,
            crosscorr: true,
        }
    }
}

/// Eigenvalue summary of one sample.
#[derive(Debug, Clone)]
pub struct SampleSummary {
    pub label: String,
    pub eigenvalues: Vec<f64>,
    /// Explained-variance shares relative to the retained components.
    pub shares: Vec<f64>,
}

/// One row of the test table: a single component or the joint hypothesis.
#[derive(Debug, Clone)]
pub struct AnalysisRow {
    pub label: String,
    pub eigenvalue_test: Option<TestResult>,
    pub eigenfunction_test: Option<TestResult>,
    pub notes: Vec<String>,
}

/// Per-location cross-correlation significance map (Figure-style bins).
#[derive(Debug, Clone)]
pub struct CrossCorrMap {
    /// Bin code per grid location: 0 -> [0.1,1], 1 -> [0.05,0.1],
    /// 2 -> [0.025,0.05], 3 -> [0.01,0.025], 4 -> [0.005,0.01],
    /// 5 -> [0,0.005].
    pub bins: Vec<u8>,
    pub bin_counts: [usize; 6],
}

/// Standard bin edges of the cross-correlation map, as upper p-bounds.
pub const CROSSCORR_BIN_EDGES: [(f64, f64); 6] = [
    (0.1, 1.0),
    (0.05, 0.1),
    (0.025, 0.05),
    (0.01, 0.025),
    (0.005, 0.01),
    (0.0, 0.005),
];

#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub n1: usize,
    pub n2: usize,
    pub period: usize,
    pub x: SampleSummary,
    pub y: SampleSummary,
    pub rows: Vec<AnalysisRow>,
    pub crosscorr: Option<CrossCorrMap>,
}

fn bracket_bin(bracket: (f64, f64)) -> u8 {
    CROSSCORR_BIN_EDGES
        .iter()
        .position(|&(lo, hi)| (bracket.0 - lo).abs() < 1e-12 && (bracket.1 - hi).abs() < 1e-12)
        .unwrap_or(0) as u8
}

fn run_pair_tests(
    cache: &mut PairCache,
    target: ComponentTarget,
    opts: &AnalyzeOptions,
    tables: &NullTables,
) -> AnalysisRow {
    let label = match target {
        ComponentTarget::Component(j) => format!("{j}"),
        ComponentTarget::Leading(c) => format!("joint(1..{c})"),
    };
    let mut notes = Vec::new();
    let cfg_val = TestConfig {
        k: 1,
        target,
        p: opts.p.max(target.max_index()),
        epsilon: opts.epsilon,
        basis_variant: opts.variant,
        alpha: opts.alpha,
    };
    let eigenvalue_test = match test_eigenvalues_with(cache, &cfg_val, tables) {
        Ok(r) => Some(r),
        Err(Error::DegenerateNormalizer { condition }) => {
            notes.push(format!("eigenvalue normalizer degenerate (cond {condition:.2e})"));
            None
        }
        Err(e) => {
            notes.push(format!("eigenvalue test failed: {e}"));
            None
        }
    };
    let eigenfunction_test = match test_eigenfunctions_with(cache, &cfg_val, tables) {
        Ok(r) => Some(r),
        Err(Error::DegenerateNormalizer { condition }) => {
            notes.push(format!("eigenfunction normalizer degenerate (cond {condition:.2e})"));
            None
        }
        Err(e) => {
            notes.push(format!("eigenfunction test failed: {e}"));
            None
        }
    };
    AnalysisRow { label, eigenvalue_test, eigenfunction_test, notes }
}

/// Runs the full pipeline on two loaded samples sharing a grid.
pub fn analyze_two_samples(
    x: &FunctionalSample,
    y: &FunctionalSample,
    opts: &AnalyzeOptions,
    tables: &mut NullTables,
) -> Result<AnalysisReport> {
    if x.grid() != y.grid() {
        return Err(Error::Dimension("samples live on different grids".into()));
    }
    if opts.m == 0 || opts.m > opts.p {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= M <= p, got M = {}, p = {}",
            opts.m, opts.p
        )));
    }
    let dx = seasonal_demean(x, opts.period)?;
    let dy = seasonal_demean(y, opts.period)?;

    let summary_depth = opts.p.max(opts.m).max(3);
    let ex = full_sample_eigen(&dx, summary_depth.min(dx.n()))?;
    let ey = full_sample_eigen(&dy, summary_depth.min(dy.n()))?;
    let x_summary = SampleSummary {
        label: if x.label().is_empty() { "x".into() } else { x.label().into() },
        eigenvalues: ex.values.clone(),
        shares: ex.explained_shares(),
    };
    let y_summary = SampleSummary {
        label: if y.label().is_empty() { "y".into() } else { y.label().into() },
        eigenvalues: ey.values.clone(),
        shares: ey.explained_shares(),
    };

    // Null tables for exactly the dimensions the configured tests request.
    let mut targets: Vec<ComponentTarget> =
        (1..=opts.m).map(ComponentTarget::Component).collect();
    if opts.m >= 2 {
        targets.push(ComponentTarget::Leading(opts.m));
    }
    for &t in &targets {
        tables.ensure(t.count(), opts.epsilon)?;
        let variant = opts
            .variant
            .unwrap_or_else(|| crate::sntest::BasisVariant::default_for(t));
        if let Ok(blocks) = crate::sntest::basis_blocks(variant, t, opts.p.max(t.max_index())) {
            let m0: usize = blocks.iter().map(|b| b.elements.len()).sum();
            tables.ensure(m0, opts.epsilon)?;
        }
    }
    tables.ensure(1, 0.0)?;

    let pair = SamplePair::new(dx.clone(), dy.clone())?;
    let mut cache = PairCache::new(&pair);
    let rows: Vec<AnalysisRow> =
        targets.iter().map(|&t| run_pair_tests(&mut cache, t, opts, tables)).collect();

    let crosscorr = if opts.crosscorr {
        let g = dx.n_points();
        let mut bins = vec![0u8; g];
        let mut counts = [0usize; 6];
        for loc in 0..g {
            let xs: Vec<f64> = (0..dx.n()).map(|i| dx.values()[(i, loc)]).collect();
            let ys: Vec<f64> = (0..dy.n()).map(|i| dy.values()[(i, loc)]).collect();
            let bin = match lag0_crosscorr_sn(&xs, &ys, opts.alpha, tables) {
                Ok(r) => bracket_bin(r.p_bracket),
                Err(_) => 0,
            };
            bins[loc] = bin;
            counts[bin as usize] += 1;
        }
        Some(CrossCorrMap { bins, bin_counts: counts })
    } else {
        None
    };

    Ok(AnalysisReport {
        n1: dx.n(),
        n2: dy.n(),
        period: opts.period,
        x: x_summary,
        y: y_summary,
        rows,
        crosscorr,
    })
}

fn fmt_bracket(b: (f64, f64)) -> String {
    format!("({}, {})", b.0, b.1)
}

impl AnalysisReport {
    /// Markdown report: eigen summaries, the per-component/joint test
    /// table, and cross-correlation bin counts.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# Two-sample second-order analysis\n");
        let _ = writeln!(
            out,
            "N1 = {}, N2 = {}, seasonal period = {}\n",
            self.n1, self.n2, self.period
        );
        let _ = writeln!(out, "## Eigenvalue summaries\n");
        let _ = writeln!(
            out,
            "| j | {} eigenvalue | share | {} eigenvalue | share |",
            self.x.label, self.y.label
        );
        let _ = writeln!(out, "|---|---|---|---|---|");
        for j in 0..self.x.eigenvalues.len().min(self.y.eigenvalues.len()) {
            let _ = writeln!(
                out,
                "| {} | {:.4} | {:.1}% | {:.4} | {:.1}% |",
                j + 1,
                self.x.eigenvalues[j],
                100.0 * self.x.shares[j],
                self.y.eigenvalues[j],
                100.0 * self.y.shares[j]
            );
        }
        let _ = writeln!(out, "\n## Second-order tests\n");
        let _ = writeln!(
            out,
            "| component | eigenvalue stat | p-value | eigenfunction stat | p-value |"
        );
        let _ = writeln!(out, "|---|---|---|---|---|");
        for row in &self.rows {
            let (vs, vb) = row
                .eigenvalue_test
                .as_ref()
                .map(|r| (format!("{:.1}", r.statistic), fmt_bracket(r.p_bracket)))
                .unwrap_or_else(|| ("-".into(), "degenerate".into()));
            let (fs, fb) = row
                .eigenfunction_test
                .as_ref()
                .map(|r| (format!("{:.1}", r.statistic), fmt_bracket(r.p_bracket)))
                .unwrap_or_else(|| ("-".into(), "degenerate".into()));
            let _ = writeln!(out, "| {} | {} | {} | {} | {} |", row.label, vs, vb, fs, fb);
            for note in &row.notes {
                let _ = writeln!(out, "|   | note: {note} | | | |");
            }
        }
        if let Some(cc) = &self.crosscorr {
            let _ = writeln!(out, "\n## Lag-zero cross-correlation map\n");
            let _ = writeln!(out, "| bin | p-value range | locations |");
            let _ = writeln!(out, "|---|---|---|");
            for (b, &(lo, hi)) in CROSSCORR_BIN_EDGES.iter().enumerate() {
                let _ =
                    writeln!(out, "| {b} | [{lo}, {hi}] | {} |", cc.bin_counts[b]);
            }
        }
        out
    }

    /// CSV of the cross-correlation bins, one line per grid location.
    pub fn crosscorr_csv(&self) -> Option<String> {
        self.crosscorr.as_ref().map(|cc| {
            let mut out = String::from("location,bin\n");
            for (i, b) in cc.bins.iter().enumerate() {
                let _ = writeln!(out, "{i},{b}");
            }
            out
        })
    }
}

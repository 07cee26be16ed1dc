//! Result tables of Monte Carlo experiments, with CSV and markdown output.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// One (scenario, test, parameter) cell of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    /// Per-sample size `N1 = N2` (or `N1` when unequal).
    pub n: usize,
    /// Test family, e.g. `sn-cov`.
    pub family: String,
    /// Parameter label, e.g. `K=3`.
    pub param: String,
    /// Rejection rate over effective replications.
    pub rate: f64,
    /// Binomial Monte Carlo standard error `sqrt(r(1-r)/n_eff)`.
    pub stderr: f64,
    /// Replications that produced a decision.
    pub n_effective: usize,
    /// Replications rejected by a degenerate self-normalizer.
    pub degenerate: usize,
    /// Replications lost to other errors.
    pub errors: usize,
}

/// Rows keyed by (scenario, N, test, parameter).
#[derive(Debug, Clone, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub n_rep: usize,
    /// Free-form diagnostics (first error message per failing test, ...).
    pub notes: Vec<String>,
}

/// Output format for [`emit_table`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl ResultTable {
    /// Row whose `family(param)` id equals `id`.
    pub fn get(&self, id: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| format!("{}({})", r.family, r.param) == id)
    }

    /// Rejection rate for a test id, as a convenience for assertions.
    pub fn rate(&self, id: &str) -> Option<f64> {
        self.get(id).map(|r| r.rate)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,n,test,param,rate,stderr,n_effective,degenerate,errors\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.scenario,
                r.n,
                r.family,
                r.param,
                r.rate,
                r.stderr,
                r.n_effective,
                r.degenerate,
                r.errors
            );
        }
        out
    }

    /// Markdown in the rows-by-test, columns-by-parameter layout.
    pub fn to_markdown(&self) -> String {
        let notes_block: String = self
            .notes
            .iter()
            .map(|n| format!("\n> {n}"))
            .collect();
        let params: Vec<String> = self
            .rows
            .iter()
            .map(|r| r.param.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut keys: Vec<(String, usize, String)> = self
            .rows
            .iter()
            .map(|r| (r.scenario.clone(), r.n, r.family.clone()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        keys.sort();
        let mut out = String::new();
        let _ = write!(out, "| scenario | N | test |");
        for p in &params {
            let _ = write!(out, " {p} |");
        }
        let _ = writeln!(out);
        let _ = write!(out, "|---|---|---|");
        for _ in &params {
            let _ = write!(out, "---|");
        }
        let _ = writeln!(out);
        for (scenario, n, family) in keys {
            let _ = write!(out, "| {scenario} | {n} | {family} |");
            for p in &params {
                let cell = self
                    .rows
                    .iter()
                    .find(|r| {
                        r.scenario == scenario && r.n == n && r.family == family && &r.param == p
                    })
                    .map(|r| {
                        let mut s = format!("{:.1}", 100.0 * r.rate);
                        if r.degenerate > 0 || r.errors > 0 {
                            let _ = write!(s, " ({}d/{}e)", r.degenerate, r.errors);
                        }
                        s
                    })
                    .unwrap_or_default();
                let _ = write!(out, " {cell} |");
            }
            let _ = writeln!(out);
        }
        out.push_str(&notes_block);
        out
    }
}

/// Renders a result table in the requested format.
pub fn emit_table(table: &ResultTable, format: TableFormat) -> String {
    match format {
        TableFormat::Csv => table.to_csv(),
        TableFormat::Markdown => table.to_markdown(),
    }
}

/// Parses the CSV emitted by [`ResultTable::to_csv`] (round-trip support
/// for downstream tooling and golden tests).
pub fn parse_table_csv(text: &str) -> Result<ResultTable> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected 9 fields, got {}", f.len()),
            });
        }
        let parse_err = |tok: &str| Error::Parse {
            line: i + 1,
            message: format!("cannot parse '{tok}'"),
        };
        rows.push(ResultRow {
            scenario: f[0].to_string(),
            n: f[1].parse().map_err(|_| parse_err(f[1]))?,
            family: f[2].to_string(),
            param: f[3].to_string(),
            rate: f[4].parse().map_err(|_| parse_err(f[4]))?,
            stderr: f[5].parse().map_err(|_| parse_err(f[5]))?,
            n_effective: f[6].parse().map_err(|_| parse_err(f[6]))?,
            degenerate: f[7].parse().map_err(|_| parse_err(f[7]))?,
            errors: f[8].parse().map_err(|_| parse_err(f[8]))?,
        });
    }
    Ok(ResultTable { rows, n_rep: 0, notes: vec![] })
}

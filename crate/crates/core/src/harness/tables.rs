use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{MethodSpec, ScenarioResult};
use crate::io::format_sig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    #[default]
    Csv,
    Markdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableOptions {
    pub format: TableFormat,
    /// Include the time and thread-count columns.
    pub include_timing: bool,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self { format: TableFormat::Csv, include_timing: true }
    }
}

const SIG: usize = 6;

struct Group<'a> {
    g: String,
    sigma_u2: f64,
    results: Vec<&'a ScenarioResult>,
}

impl Group<'_> {
    fn sizes(&self) -> Vec<usize> {
        let mut ns: Vec<usize> = self.results.iter().map(|r| r.spec.n).collect();
        ns.sort_unstable();
        ns.dedup();
        ns
    }

    fn methods(&self) -> Vec<MethodSpec> {
        let mut out: Vec<MethodSpec> = Vec::new();
        for m in self.results.iter().flat_map(|r| r.methods.iter().map(|m| m.method)) {
            if !out.contains(&m) {
                out.push(m);
            }
        }
        out
    }

    /// `(mse, time, threads)` of the last result with this `(n, method)`.
    fn cell(&self, n: usize, m: MethodSpec) -> Option<(f64, f64, usize)> {
        self.results
            .iter()
            .rev()
            .filter(|r| r.spec.n == n)
            .find_map(|r| r.method(m).map(|mr| (mr.mse, mr.wall_time_seconds, r.threads)))
    }
}

fn groups(results: &[ScenarioResult]) -> Vec<Group<'_>> {
    let mut out: Vec<Group<'_>> = Vec::new();
    for r in results {
        let g = r.spec.g_name.to_string();
        match out.iter_mut().find(|grp| grp.g == g && grp.sigma_u2.to_bits() == r.spec.sigma_u2.to_bits()) {
            Some(grp) => grp.results.push(r),
            None => out.push(Group { g, sigma_u2: r.spec.sigma_u2, results: vec![r] }),
        }
    }
    out
}

fn b_field(m: MethodSpec) -> String {
    m.replicates().map(|b| b.to_string()).unwrap_or_default()
}

/// Lays results out in the simulation-table shape: one row per method within
/// each `(g, σ_u²)` group, one `MSE`/`time` column block per sample size.
/// Numbers carry 6 significant digits. CSV output has a single header over
/// the union of sample sizes; Markdown emits one table per group.
pub fn emit_tables(results: &[ScenarioResult], options: TableOptions) -> String {
    match options.format {
        TableFormat::Csv => emit_csv(results, options.include_timing),
        TableFormat::Markdown => emit_markdown(results, options.include_timing),
    }
}

fn emit_csv(results: &[ScenarioResult], timing: bool) -> String {
    let mut sizes: Vec<usize> = results.iter().map(|r| r.spec.n).collect();
    sizes.sort_unstable();
    sizes.dedup();

    let mut out = String::from("g,sigma_u2,method,B");
    for n in &sizes {
        let _ = write!(out, ",mse_n{n}");
        if timing {
            let _ = write!(out, ",time_n{n}");
        }
    }
    if timing {
        out.push_str(",threads");
    }
    out.push('\n');

    for grp in groups(results) {
        for m in grp.methods() {
            let _ = write!(out, "{},{},{},{}", grp.g, format_sig(grp.sigma_u2, SIG), m.label(), b_field(m));
            let mut threads = None;
            for &n in &sizes {
                match grp.cell(n, m) {
                    Some((mse, time, t)) => {
                        let _ = write!(out, ",{}", format_sig(mse, SIG));
                        if timing {
                            let _ = write!(out, ",{}", format_sig(time, SIG));
                        }
                        threads.get_or_insert(t);
                    }
                    None => out.push_str(if timing { ",," } else { "," }),
                }
            }
            if timing {
                let _ = write!(out, ",{}", threads.map(|t| t.to_string()).unwrap_or_default());
            }
            out.push('\n');
        }
    }
    out
}

fn emit_markdown(results: &[ScenarioResult], timing: bool) -> String {
    let mut out = String::new();
    for (i, grp) in groups(results).into_iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let sizes = grp.sizes();
        let _ = writeln!(out, "### g = {}, sigma_u2 = {}\n", grp.g, format_sig(grp.sigma_u2, SIG));
        let mut head = String::from("| Method | B |");
        let mut rule = String::from("|---|---|");
        for n in &sizes {
            let _ = write!(head, " MSE (n={n}) |");
            rule.push_str("---:|");
            if timing {
                let _ = write!(head, " Time(s) (n={n}) |");
                rule.push_str("---:|");
            }
        }
        if timing {
            head.push_str(" Threads |");
            rule.push_str("---:|");
        }
        let _ = writeln!(out, "{head}\n{rule}");
        for m in grp.methods() {
            let _ = write!(out, "| {} | {} |", m.label(), b_field(m));
            let mut threads = None;
            for &n in &sizes {
                match grp.cell(n, m) {
                    Some((mse, time, t)) => {
                        let _ = write!(out, " {} |", format_sig(mse, SIG));
                        if timing {
                            let _ = write!(out, " {} |", format_sig(time, SIG));
                        }
                        threads.get_or_insert(t);
                    }
                    None => out.push_str(if timing { "  |  |" } else { "  |" }),
                }
            }
            if timing {
                let _ = write!(out, " {} |", threads.map(|t| t.to_string()).unwrap_or_default());
            }
            out.push('\n');
        }
    }
    out
}

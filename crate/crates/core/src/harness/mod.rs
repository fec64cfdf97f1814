//! Seeded Monte-Carlo benchmark harness.
//!
//! A [`SimulationSpec`] names a regression function, sample size and error
//! variance. [`run_scenario`] draws `n_datasets` datasets, runs every
//! requested estimator on the same datasets, averages the estimated curves
//! pointwise and scores the averaged curve by its MSE on the x grid.
//! [`emit_tables`] lays results out as method rows with one MSE/time column
//! block per sample size.

mod spec;
mod tables;

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::extrapolation::extrapolate_profile;
use crate::io::{header_line, write_curves};
use crate::locallinear::{ex_profile, naive_profile, simex_profile, ObservedSample};
use crate::rng::{derive_seed, keyed_stream, tag};

pub use spec::{parse_specs, GName, GridSpan, MethodSpec, SimulationSpec, CUSTOM_FUNCTIONS, DEFAULT_SIMEX_REPLICATES};
pub use tables::{emit_tables, TableFormat, TableOptions};

/// One simulated dataset with its hidden truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sample: ObservedSample,
    pub x: Vec<f64>,
    pub gx: Vec<f64>,
}

/// Draws dataset `dataset_index` of `spec` from its own keyed stream.
pub fn generate_dataset(spec: &SimulationSpec, dataset_index: usize) -> Result<Dataset> {
    let mut stream = keyed_stream(spec.seed, &[tag::DATASET, dataset_index as u64]);
    generate_dataset_with(spec, &mut stream)
}

/// As [`generate_dataset`] with a caller-supplied stream. Draws all `X`,
/// then all `ε`, then all `U`.
pub fn generate_dataset_with<R: Rng + ?Sized>(spec: &SimulationSpec, stream: &mut R) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.n;
    let mut normals = |count: usize| -> Vec<f64> { (0..count).map(|_| stream.sample(StandardNormal)).collect() };
    let x = normals(n);
    let eps = normals(n);
    let u = normals(n);
    let (tau, su) = (spec.tau2.sqrt(), spec.sigma_u2.sqrt());
    let gx: Vec<f64> = x.iter().map(|&xi| spec.g_name.eval(xi)).collect();
    let y = gx.iter().zip(&eps).map(|(g, e)| g + tau * e).collect();
    let z = x.iter().zip(&u).map(|(xi, ui)| xi + su * ui).collect();
    let sample = ObservedSample::new(y, z, spec.sigma_u2)?;
    Ok(Dataset { sample, x, gx })
}

/// Per-method outcome of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: MethodSpec,
    /// MSE of the dataset-averaged curve against `g` on the x grid.
    pub mse: f64,
    /// Mean over datasets of the per-dataset curve MSE.
    pub mean_dataset_mse: f64,
    /// Estimation time summed over datasets; data generation excluded.
    pub wall_time_seconds: f64,
    /// Degenerate local fits plus x points where extrapolation had too few
    /// usable λ cells.
    pub degenerate_cell_count: u64,
    /// x points with no estimate in at least one dataset.
    pub missing_points: usize,
    /// Dataset-averaged curve; NaN where no dataset produced a value.
    pub curve: Vec<f64>,
    /// Per-dataset curves, kept when the scenario asks for them.
    pub dataset_curves: Option<Vec<Vec<f64>>>,
    /// Fingerprint of the `Z` vectors this method consumed.
    pub data_hash: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    /// The scenario with its bandwidth resolved.
    pub spec: SimulationSpec,
    pub x_grid: Vec<f64>,
    /// `g` on the x grid.
    pub truth: Vec<f64>,
    /// Rayon worker threads available during estimation.
    pub threads: usize,
    pub methods: Vec<MethodResult>,
}

impl ScenarioResult {
    pub fn method(&self, m: MethodSpec) -> Option<&MethodResult> {
        self.methods.iter().find(|r| r.method == m)
    }

    /// Stable identifier used for curve file names.
    pub fn label(&self) -> String {
        format!(
            "{}_n{}_su2_{}",
            self.spec.g_name.to_string().replace(':', "-"),
            self.spec.n,
            crate::io::format_sig(self.spec.sigma_u2, 6)
        )
    }
}

fn fnv1a(values: &[f64], mut state: u64) -> u64 {
    for v in values {
        for byte in v.to_bits().to_le_bytes() {
            state ^= byte as u64;
            state = state.wrapping_mul(0x0100_0000_01b3);
        }
    }
    state
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;

fn curve_mse(curve: &[f64], truth: &[f64]) -> f64 {
    let (sum, count) = curve
        .iter()
        .zip(truth)
        .filter(|(c, _)| c.is_finite())
        .fold((0.0, 0usize), |(s, k), (c, t)| (s + (c - t).powi(2), k + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

fn estimate_curve(
    spec: &SimulationSpec,
    method: MethodSpec,
    data: &Dataset,
    dataset_index: usize,
    x_grid: &[f64],
) -> Result<(Vec<f64>, u64)> {
    let mut cfg = spec.smoother_config(method.replicates().unwrap_or(1));
    cfg.seed = derive_seed(spec.seed, &[dataset_index as u64]);
    let s = &data.sample;
    match method {
        MethodSpec::Naive => {
            let p = naive_profile(s, x_grid, &cfg)?;
            Ok((p.column(0), p.degenerate_count()))
        }
        MethodSpec::Ex | MethodSpec::Simex(_) => {
            let p = if method == MethodSpec::Ex { ex_profile(s, x_grid, &cfg)? } else { simex_profile(s, x_grid, &cfg)? };
            let e = extrapolate_profile(&p, spec.extrapolant)?;
            let deg = p.degenerate_count() + e.missing() as u64;
            Ok((e.curve, deg))
        }
    }
}

/// Runs every method of `spec` on the same `n_datasets` datasets.
pub fn run_scenario(spec: &SimulationSpec) -> Result<ScenarioResult> {
    spec.validate()?;
    let spec = spec.resolved();
    let x_grid = spec.x_grid.points();
    let truth: Vec<f64> = x_grid.iter().map(|&x| spec.g_name.eval(x)).collect();
    let datasets: Vec<Dataset> = (0..spec.n_datasets).map(|d| generate_dataset(&spec, d)).collect::<Result<_>>()?;
    let threads = rayon::current_num_threads();

    let mut methods = Vec::with_capacity(spec.methods.len());
    for &method in &spec.methods {
        let mut curves = Vec::with_capacity(datasets.len());
        let mut degenerate = 0u64;
        let mut elapsed = 0.0;
        let mut data_hash = FNV_OFFSET;
        for (d, data) in datasets.iter().enumerate() {
            data_hash = fnv1a(data.sample.z(), data_hash);
            let start = Instant::now();
            let (curve, deg) = estimate_curve(&spec, method, data, d, &x_grid)?;
            elapsed += start.elapsed().as_secs_f64();
            degenerate += deg;
            curves.push(curve);
        }

        let mut missing_points = 0;
        let curve: Vec<f64> = (0..x_grid.len())
            .map(|j| {
                let vals: Vec<f64> = curves.iter().map(|c| c[j]).filter(|v| v.is_finite()).collect();
                if vals.len() < curves.len() {
                    missing_points += 1;
                }
                if vals.is_empty() {
                    f64::NAN
                } else {
                    vals.iter().sum::<f64>() / vals.len() as f64
                }
            })
            .collect();
        let mse = curve_mse(&curve, &truth);
        let mean_dataset_mse = curves.iter().map(|c| curve_mse(c, &truth)).sum::<f64>() / curves.len() as f64;
        methods.push(MethodResult {
            method,
            mse,
            mean_dataset_mse,
            wall_time_seconds: elapsed,
            degenerate_cell_count: degenerate,
            missing_points,
            curve,
            dataset_curves: spec.emit_curves.then_some(curves),
            data_hash,
        });
    }
    Ok(ScenarioResult { spec, x_grid, truth, threads, methods })
}

/// Runs `specs` in order and writes `tables.csv` (plus `tables.md`) into
/// `out_dir`. Scenarios with `emit_curves` also get `curves/<label>.csv` for
/// the averaged curves and `curves/<label>_d<k>.csv` per dataset.
pub fn simulate_to_dir(specs: &[SimulationSpec], out_dir: &Path, options: TableOptions) -> Result<Vec<ScenarioResult>> {
    let results: Vec<ScenarioResult> = specs.iter().map(run_scenario).collect::<Result<_>>()?;
    std::fs::create_dir_all(out_dir)?;
    let config = serde_json::to_value(results.iter().map(|r| &r.spec).collect::<Vec<_>>())?;
    let header = header_line(&config);

    let csv = emit_tables(&results, TableOptions { format: TableFormat::Csv, ..options });
    std::fs::write(out_dir.join("tables.csv"), format!("{header}{csv}"))?;
    let md = emit_tables(&results, TableOptions { format: TableFormat::Markdown, ..options });
    std::fs::write(out_dir.join("tables.md"), format!("<!-- {config} -->\n{md}"))?;

    for r in results.iter().filter(|r| r.spec.emit_curves) {
        let dir = out_dir.join("curves");
        std::fs::create_dir_all(&dir)?;
        let scenario_header = header_line(&serde_json::to_value(&r.spec)?);
        let names = curve_column_names(r);
        let avg: Vec<(&str, &[f64])> =
            names.iter().zip(&r.methods).map(|(n, m)| (n.as_str(), m.curve.as_slice())).collect();
        write_with_header(&dir.join(format!("{}.csv", r.label())), &scenario_header, &r.x_grid, &avg)?;
        for d in 0..r.spec.n_datasets {
            let cols: Vec<(&str, &[f64])> = names
                .iter()
                .zip(&r.methods)
                .filter_map(|(n, m)| m.dataset_curves.as_ref().map(|c| (n.as_str(), c[d].as_slice())))
                .collect();
            write_with_header(&dir.join(format!("{}_d{d}.csv", r.label())), &scenario_header, &r.x_grid, &cols)?;
        }
    }
    Ok(results)
}

fn curve_column_names(r: &ScenarioResult) -> Vec<String> {
    let simex_count = r.methods.iter().filter(|m| matches!(m.method, MethodSpec::Simex(_))).count();
    r.methods
        .iter()
        .map(|m| match m.method {
            MethodSpec::Simex(b) if simex_count > 1 => format!("g_simex_b{b}"),
            other => format!("g_{}", other.label().to_ascii_lowercase()),
        })
        .collect()
}

fn write_with_header(path: &Path, header: &str, x: &[f64], cols: &[(&str, &[f64])]) -> Result<()> {
    let mut buf = header.as_bytes().to_vec();
    write_curves(&mut buf, x, cols)?;
    std::fs::write(path, buf)?;
    Ok(())
}

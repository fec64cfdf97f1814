use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use exsmooth::asymptotics::{diagnose_grid, BuiltinTruth, QuadratureConfig, TrueModel};
use exsmooth::errormodel::{collapse_replicates, transform_response, Transform};
use exsmooth::extrapolation::{extrapolate_derivative_profile, extrapolate_profile, ExtrapolantFamily};
use exsmooth::harness::{emit_tables, parse_specs, simulate_to_dir, TableFormat, TableOptions};
use exsmooth::io::{header_line, linspace, parse_span_grid, parse_step_grid, read_observed_csv, read_replicate_csv, write_curves};
use exsmooth::locallinear::{
    default_bandwidth, ex_profile, naive_profile, simex_profile, Method, ObservedSample, SmootherConfig,
    DEFAULT_DET_FLOOR,
};
use exsmooth::{Error, Result};

/// Local-linear regression with Gaussian covariate measurement error:
/// EX, SIMEX and naive estimators, simulation benchmarks and asymptotic
/// diagnostics.
#[derive(Parser)]
#[command(name = "exsmooth", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run simulation scenarios from a JSON spec file and write result tables.
    Simulate(SimulateArgs),
    /// Estimate a regression curve from observed data.
    Fit(FitArgs),
    /// Tabulate limit, bias and variance of the EX estimator for a known model.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file: one JSON object or an array of them.
    #[arg(long)]
    spec: PathBuf,
    /// Output directory for tables.csv, tables.md and curves/.
    #[arg(long)]
    out: PathBuf,
    /// Write averaged and per-dataset curves for every scenario.
    #[arg(long)]
    emit_curves: bool,
    /// Leave the time and thread columns out of the tables.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct FitArgs {
    /// CSV with columns y,z (or y,w1,w2 with --replicates).
    #[arg(long)]
    data: PathBuf,
    /// Known measurement-error variance of z.
    #[arg(long, allow_hyphen_values = true, required_unless_present = "replicates", conflicts_with = "replicates")]
    sigma_u2: Option<f64>,
    /// Data holds two replicate measurements; the error variance is estimated.
    #[arg(long)]
    replicates: bool,
    #[arg(long, default_value = "ex")]
    method: Method,
    /// SIMEX replicates per lambda.
    #[arg(long = "B", visible_alias = "b", default_value_t = 50)]
    replicates_b: usize,
    /// Kernel bandwidth (default n^(-1/5)).
    #[arg(long, allow_hyphen_values = true)]
    bandwidth: Option<f64>,
    /// Lambda grid as start:step:end.
    #[arg(long, allow_hyphen_values = true, default_value = "0:0.2:2")]
    lambda_grid: String,
    /// quadratic, poly:<p> or rational.
    #[arg(long, default_value = "quadratic")]
    extrapolant: ExtrapolantFamily,
    #[arg(long, default_value = "none")]
    transform: Transform,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluation grid as lo:hi:count (default 200 points over the range of z).
    #[arg(long, allow_hyphen_values = true)]
    x_grid: Option<String>,
    /// Output CSV; `-` for stdout.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// quadratic, exp or xsinx, with X ~ N(0,1).
    #[arg(long)]
    truth: BuiltinTruth,
    #[arg(long, allow_hyphen_values = true)]
    sigma_u2: f64,
    /// Conditional variance of the regression error.
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    tau2: f64,
    /// x grid as lo:hi:count.
    #[arg(long, allow_hyphen_values = true, default_value = "-2:2:9")]
    x_grid: String,
    /// Lambda grid as start:step:end.
    #[arg(long, allow_hyphen_values = true, default_value = "0:0.2:2")]
    lambda_grid: String,
    /// adaptive or fixed:<nodes>.
    #[arg(long, default_value = "adaptive")]
    quadrature: String,
    /// Output CSV; `-` for stdout.
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Diagnose(a) => diagnose(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    if path.as_os_str() == "-" {
        std::io::stdout().write_all(bytes)?;
    } else {
        std::fs::write(path, bytes)?;
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.spec)?;
    let mut specs = parse_specs(&text)?;
    if a.emit_curves {
        specs.iter_mut().for_each(|s| s.emit_curves = true);
    }
    let options = TableOptions { format: TableFormat::Csv, include_timing: !a.no_timing };
    let results = simulate_to_dir(&specs, &a.out, options)?;
    print!("{}", emit_tables(&results, TableOptions { format: TableFormat::Markdown, ..options }));
    eprintln!("wrote {}", a.out.join("tables.csv").display());
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let (sample, sigma_source) = if a.replicates {
        let r = read_replicate_csv(&a.data)?;
        let s = collapse_replicates(&r)?;
        let y = transform_response(s.y(), a.transform)?;
        (ObservedSample::new(y, s.z().to_vec(), s.sigma_u2())?, "replicates")
    } else {
        let (y, z) = read_observed_csv(&a.data)?;
        let y = transform_response(&y, a.transform)?;
        let sigma_u2 = a.sigma_u2.expect("clap requires --sigma-u2 without --replicates");
        (ObservedSample::new(y, z, sigma_u2)?, "flag")
    };
    let x_grid = match &a.x_grid {
        Some(g) => parse_span_grid(g)?,
        None => {
            let (lo, hi) = sample.z().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            linspace(lo, hi, 200)
        }
    };
    let cfg = SmootherConfig {
        bandwidth: a.bandwidth.unwrap_or_else(|| default_bandwidth(sample.len())),
        lambda_grid: parse_step_grid(&a.lambda_grid)?,
        det_floor: DEFAULT_DET_FLOOR,
        simex_replicates: a.replicates_b,
        seed: a.seed,
    };
    cfg.validate()?;

    let (g, g_prime) = match a.method {
        Method::Naive => {
            let p = naive_profile(&sample, &x_grid, &cfg)?;
            (p.column(0), (0..p.n_x()).map(|j| p.g_prime(j, 0)).collect())
        }
        Method::Ex | Method::Simex => {
            let p = if a.method == Method::Ex { ex_profile(&sample, &x_grid, &cfg)? } else { simex_profile(&sample, &x_grid, &cfg)? };
            let g = extrapolate_profile(&p, a.extrapolant)?;
            let gp = extrapolate_derivative_profile(&p, a.extrapolant)?;
            if g.missing() > 0 {
                eprintln!("warning: {} x points had too few usable lambda values and are left blank", g.missing());
            }
            (g.curve, gp.curve)
        }
    };

    let config = json!({
        "command": "fit",
        "data": a.data.display().to_string(),
        "n": sample.len(),
        "method": a.method,
        "sigma_u2": sample.sigma_u2(),
        "sigma_u2_source": sigma_source,
        "transform": a.transform,
        "bandwidth": cfg.bandwidth,
        "lambda_grid": cfg.lambda_grid,
        "extrapolant": a.extrapolant.to_string(),
        "simex_replicates": cfg.simex_replicates,
        "seed": cfg.seed,
        "x_grid": { "lo": x_grid[0], "hi": x_grid[x_grid.len() - 1], "count": x_grid.len() },
    });
    let mut buf = header_line(&config).into_bytes();
    write_curves(&mut buf, &x_grid, &[("g_hat", &g), ("g_prime_hat", &g_prime)])?;
    write_output(&a.out, &buf)
}

fn parse_quadrature(s: &str) -> Result<QuadratureConfig> {
    match s.strip_prefix("fixed:") {
        None if s == "adaptive" => Ok(QuadratureConfig::default()),
        Some(n) => n
            .parse::<usize>()
            .map(QuadratureConfig::fixed)
            .map_err(|_| Error::Domain(format!("bad node count in '{s}'"))),
        None => Err(Error::Domain(format!("unknown quadrature '{s}' (expected adaptive or fixed:<nodes>)"))),
    }
}

fn diagnose(a: DiagnoseArgs) -> Result<()> {
    let q = parse_quadrature(&a.quadrature)?;
    let model = TrueModel::builtin(a.truth, a.tau2, a.sigma_u2)?;
    let xs = parse_span_grid(&a.x_grid)?;
    let lambdas = parse_step_grid(&a.lambda_grid)?;
    let rows = diagnose_grid(&model, &xs, &lambdas, &q)?;

    let config = json!({
        "command": "diagnose",
        "truth": a.truth.name(),
        "sigma_u2": a.sigma_u2,
        "tau2": a.tau2,
        "x_grid": xs,
        "lambda_grid": lambdas,
        "quadrature": a.quadrature,
        "abs_tol": q.abs_tol,
        "rel_tol": q.rel_tol,
    });
    let mut out = header_line(&config);
    out.push_str("x,lambda,gamma,bias,delta\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.x, r.lambda, r.gamma, r.bias2, r.var_point));
    }
    write_output(&a.out, out.as_bytes())
}

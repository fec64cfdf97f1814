use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, Error, Result};
use crate::extrapolation::ExtrapolantFamily;
use crate::io::linspace;
use crate::locallinear::{default_bandwidth, DEFAULT_DET_FLOOR};

/// Regression function of a simulation scenario.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GName {
    XSinX,
    Square,
    Exp,
    /// A named entry of [`CUSTOM_FUNCTIONS`].
    Custom(String),
}

pub type RealFunction = fn(f64) -> f64;

/// Extra regression functions selectable as `custom:<id>`.
pub const CUSTOM_FUNCTIONS: &[(&str, RealFunction)] = &[
    ("linear", |x| x),
    ("sin", f64::sin),
    ("cube", |x| x * x * x),
    ("zero", |_| 0.0),
];

impl GName {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            GName::XSinX => x * x.sin(),
            GName::Square => x * x,
            GName::Exp => x.exp(),
            GName::Custom(id) => lookup_custom(id).map_or(f64::NAN, |f| f(x)),
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

fn lookup_custom(id: &str) -> Option<RealFunction> {
    CUSTOM_FUNCTIONS.iter().find(|(n, _)| *n == id).map(|(_, f)| *f)
}

impl fmt::Display for GName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GName::XSinX => f.write_str("xsinx"),
            GName::Square => f.write_str("square"),
            GName::Exp => f.write_str("exp"),
            GName::Custom(id) => write!(f, "custom:{id}"),
        }
    }
}

impl FromStr for GName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xsinx" => Ok(GName::XSinX),
            "square" | "quadratic" => Ok(GName::Square),
            "exp" => Ok(GName::Exp),
            other => match other.strip_prefix("custom:") {
                Some(id) if lookup_custom(id).is_some() => Ok(GName::Custom(id.to_string())),
                _ => {
                    let ids: Vec<&str> = CUSTOM_FUNCTIONS.iter().map(|(n, _)| *n).collect();
                    Err(domain(format!(
                        "unknown regression function '{s}' (expected xsinx, square, exp or custom:<{}>)",
                        ids.join("|")
                    )))
                }
            },
        }
    }
}

/// An estimator as configured in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodSpec {
    Naive,
    /// SIMEX with `B` replicates per λ.
    Simex(usize),
    Ex,
}

pub const DEFAULT_SIMEX_REPLICATES: usize = 50;

impl MethodSpec {
    pub fn label(self) -> &'static str {
        match self {
            MethodSpec::Naive => "Naive",
            MethodSpec::Simex(_) => "SIMEX",
            MethodSpec::Ex => "EX",
        }
    }

    pub fn replicates(self) -> Option<usize> {
        match self {
            MethodSpec::Simex(b) => Some(b),
            _ => None,
        }
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodSpec::Naive => f.write_str("naive"),
            MethodSpec::Simex(b) => write!(f, "simex:{b}"),
            MethodSpec::Ex => f.write_str("ex"),
        }
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "naive" => Ok(MethodSpec::Naive),
            "ex" => Ok(MethodSpec::Ex),
            "simex" => Ok(MethodSpec::Simex(DEFAULT_SIMEX_REPLICATES)),
            _ => {
                let b = t
                    .strip_prefix("simex:")
                    .and_then(|b| b.parse::<usize>().ok())
                    .ok_or_else(|| domain(format!("unknown method '{s}' (expected naive, ex, simex or simex:<B>)")))?;
                if b == 0 {
                    return Err(domain("SIMEX needs at least one replicate"));
                }
                Ok(MethodSpec::Simex(b))
            }
        }
    }
}

macro_rules! serde_via_string {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

serde_via_string!(GName);
serde_via_string!(MethodSpec);

/// Equally spaced evaluation points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpan {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Default for GridSpan {
    fn default() -> Self {
        Self { lo: -3.0, hi: 3.0, count: 200 }
    }
}

impl GridSpan {
    pub fn points(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.count)
    }
}

fn default_n_datasets() -> usize {
    10
}
fn default_lambda_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 * 0.2).collect()
}
fn default_methods() -> Vec<MethodSpec> {
    vec![MethodSpec::Naive, MethodSpec::Simex(DEFAULT_SIMEX_REPLICATES), MethodSpec::Ex]
}
fn default_tau2() -> f64 {
    1.0
}
fn default_det_floor() -> f64 {
    DEFAULT_DET_FLOOR
}

/// One simulation scenario. Omitted JSON fields take the simulation-study
/// defaults; unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub g_name: GName,
    pub n: usize,
    pub sigma_u2: f64,
    #[serde(default = "default_n_datasets")]
    pub n_datasets: usize,
    #[serde(default)]
    pub x_grid: GridSpan,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    /// `None` means `n^(-1/5)`.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub extrapolant: ExtrapolantFamily,
    #[serde(default)]
    pub seed: u64,
    /// Variance of the regression noise ε.
    #[serde(default = "default_tau2")]
    pub tau2: f64,
    #[serde(default = "default_det_floor")]
    pub det_floor: f64,
    /// Keep per-dataset curves in the result.
    #[serde(default)]
    pub emit_curves: bool,
}

impl SimulationSpec {
    /// Study defaults for `(g, n, σ_u²)`.
    pub fn new(g_name: GName, n: usize, sigma_u2: f64) -> Self {
        Self {
            g_name,
            n,
            sigma_u2,
            n_datasets: default_n_datasets(),
            x_grid: GridSpan::default(),
            lambda_grid: default_lambda_grid(),
            bandwidth: None,
            methods: default_methods(),
            extrapolant: ExtrapolantFamily::Quadratic,
            seed: 0,
            tau2: default_tau2(),
            det_floor: default_det_floor(),
            emit_curves: false,
        }
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth.unwrap_or_else(|| default_bandwidth(self.n))
    }

    /// The same spec with the bandwidth made explicit.
    pub fn resolved(&self) -> Self {
        Self { bandwidth: Some(self.bandwidth()), ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(domain(format!("n must be at least 10, got {}", self.n)));
        }
        if self.n_datasets == 0 {
            return Err(domain("n_datasets must be at least 1"));
        }
        if !(self.sigma_u2 > 0.0) || !self.sigma_u2.is_finite() {
            return Err(domain(format!("sigma_u2 must be positive, got {}", self.sigma_u2)));
        }
        if !(self.tau2 >= 0.0) || !self.tau2.is_finite() {
            return Err(domain(format!("tau2 must be nonnegative, got {}", self.tau2)));
        }
        if self.methods.is_empty() {
            return Err(domain("at least one method is required"));
        }
        if self.x_grid.count == 0 || !(self.x_grid.hi >= self.x_grid.lo) {
            return Err(domain("x grid must have at least one point and hi >= lo"));
        }
        if let GName::Custom(id) = &self.g_name {
            if lookup_custom(id).is_none() {
                return Err(domain(format!("unknown custom function '{id}'")));
            }
        }
        let needs_profile = self.methods.iter().any(|m| !matches!(m, MethodSpec::Naive));
        if needs_profile && self.lambda_grid.len() < self.extrapolant.min_points() {
            return Err(domain(format!(
                "{} extrapolation needs at least {} lambda points",
                self.extrapolant,
                self.extrapolant.min_points()
            )));
        }
        self.smoother_config(1).validate()
    }

    pub(crate) fn smoother_config(&self, replicates: usize) -> crate::locallinear::SmootherConfig {
        crate::locallinear::SmootherConfig {
            bandwidth: self.bandwidth(),
            lambda_grid: self.lambda_grid.clone(),
            det_floor: self.det_floor,
            simex_replicates: replicates,
            seed: self.seed,
        }
    }
}

/// Parses a spec file holding one scenario object or an array of them.
pub fn parse_specs(text: &str) -> Result<Vec<SimulationSpec>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    // Dispatch on the JSON shape by hand so field errors keep their message.
    let specs = match value {
        serde_json::Value::Array(_) => serde_json::from_value::<Vec<SimulationSpec>>(value)?,
        _ => vec![serde_json::from_value::<SimulationSpec>(value)?],
    };
    if specs.is_empty() {
        return Err(domain("spec file contains no scenarios"));
    }
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::quadrature::{integrate, QuadratureConfig};
use crate::error::{domain, Error, Result};
use crate::gausskit::pdf_unchecked;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The regression functions of the simulation study, each with `X ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinTruth {
    /// `g(x) = x²`
    Quadratic,
    /// `g(x) = eˣ`
    Exp,
    /// `g(x) = x·sin x`
    XSinX,
}

impl BuiltinTruth {
    pub fn g(self, x: f64) -> f64 {
        match self {
            BuiltinTruth::Quadratic => x * x,
            BuiltinTruth::Exp => x.exp(),
            BuiltinTruth::XSinX => x * x.sin(),
        }
    }

    pub fn g_second(self, x: f64) -> f64 {
        match self {
            BuiltinTruth::Quadratic => 2.0,
            BuiltinTruth::Exp => x.exp(),
            BuiltinTruth::XSinX => 2.0 * x.cos() - x * x.sin(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BuiltinTruth::Quadratic => "quadratic",
            BuiltinTruth::Exp => "exp",
            BuiltinTruth::XSinX => "xsinx",
        }
    }
}

impl fmt::Display for BuiltinTruth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinTruth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quadratic" | "square" => Ok(BuiltinTruth::Quadratic),
            "exp" => Ok(BuiltinTruth::Exp),
            "xsinx" => Ok(BuiltinTruth::XSinX),
            other => Err(domain(format!("unknown truth '{other}' (expected quadratic, exp or xsinx)"))),
        }
    }
}

/// Known regression function, covariate density, conditional error variance
/// and measurement-error variance.
#[derive(Clone)]
pub struct TrueModel {
    pub g: RealFn,
    /// `g″`, when known in closed form.
    pub g_second: Option<RealFn>,
    pub f_x: RealFn,
    pub tau2: RealFn,
    pub sigma_u2: f64,
    /// Closed interval outside which `f_x` vanishes (infinite ends allowed).
    pub support: (f64, f64),
}

impl fmt::Debug for TrueModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrueModel").field("sigma_u2", &self.sigma_u2).field("support", &self.support).finish_non_exhaustive()
    }
}

/// Half-width of the region checked when validating a density on an
/// unbounded support.
const NORMALIZATION_REACH: f64 = 60.0;

impl TrueModel {
    /// Validates `f_x` (unit mass on the support to 1e−8), `τ² ≥ 0` on a probe
    /// grid, and `σ_u² ≥ 0`.
    pub fn new(
        g: RealFn,
        g_second: Option<RealFn>,
        f_x: RealFn,
        tau2: RealFn,
        sigma_u2: f64,
        support: (f64, f64),
    ) -> Result<Self> {
        if !(sigma_u2 >= 0.0) || !sigma_u2.is_finite() {
            return Err(domain(format!("sigma_u2 must be nonnegative, got {sigma_u2}")));
        }
        let (a, b) = support;
        if !(b > a) {
            return Err(domain(format!("support [{a}, {b}] is empty")));
        }
        let lo = a.max(-NORMALIZATION_REACH);
        let hi = b.min(NORMALIZATION_REACH);
        let q = QuadratureConfig { abs_tol: 1e-12, rel_tol: 1e-12, ..QuadratureConfig::default() };
        let mass = integrate(|t| f_x(t), lo, hi, 64, &q)?;
        if (mass - 1.0).abs() > 1e-8 {
            return Err(domain(format!("covariate density integrates to {mass} over the support")));
        }
        let probe = crate::io::linspace(lo, hi, 401);
        if let Some(t) = probe.iter().find(|&&t| !(tau2(t) >= 0.0)) {
            return Err(domain(format!("tau2 is negative or undefined at {t}")));
        }
        Ok(Self { g, g_second, f_x, tau2, sigma_u2, support })
    }

    /// `X ~ N(0, σ_x²)` with constant `τ²`.
    pub fn gaussian_covariate(g: RealFn, g_second: Option<RealFn>, sigma_x2: f64, tau2: f64, sigma_u2: f64) -> Result<Self> {
        if !(sigma_x2 > 0.0) || !(tau2 >= 0.0) {
            return Err(domain("sigma_x2 must be positive and tau2 nonnegative"));
        }
        Self::new(
            g,
            g_second,
            Arc::new(move |t| pdf_unchecked(t, 0.0, sigma_x2)),
            Arc::new(move |_| tau2),
            sigma_u2,
            (f64::NEG_INFINITY, f64::INFINITY),
        )
    }

    /// A built-in truth with `X ~ N(0, 1)` and constant `τ²`.
    pub fn builtin(truth: BuiltinTruth, tau2: f64, sigma_u2: f64) -> Result<Self> {
        Self::gaussian_covariate(
            Arc::new(move |t| truth.g(t)),
            Some(Arc::new(move |t| truth.g_second(t))),
            1.0,
            tau2,
            sigma_u2,
        )
    }
}

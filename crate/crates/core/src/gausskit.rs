//! Gaussian density utilities and the closed-form conditional kernel moments.
//!
//! With a standard-normal kernel `K` and pseudo-noise `V ~ N(0, σ_u²)`, the
//! remeasured surrogate `Z(λ) = Z + √λ·V` has kernel moments given `(Y, Z)`
//! that are themselves Gaussian densities in `x` with variance
//! `h² + λσ_u²`. Everything is evaluated in log space and exponentiated last.

use std::f64::consts::PI;

use crate::error::{domain, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Mean and variance of a univariate normal density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussParams {
    pub mean: f64,
    pub variance: f64,
}

impl GaussParams {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        let p = Self { mean, variance };
        p.validate()?;
        Ok(p)
    }

    pub fn standard() -> Self {
        Self { mean: 0.0, variance: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.variance > 0.0) || !self.variance.is_finite() {
            return Err(domain(format!("variance must be positive and finite, got {}", self.variance)));
        }
        if !self.mean.is_finite() {
            return Err(domain(format!("mean must be finite, got {}", self.mean)));
        }
        Ok(())
    }
}

/// `log φ(x; mean, variance)`.
pub fn log_pdf(x: f64, p: GaussParams) -> Result<f64> {
    p.validate()?;
    Ok(log_pdf_unchecked(x, p.mean, p.variance))
}

/// `φ(x; mean, variance)`.
pub fn pdf(x: f64, p: GaussParams) -> Result<f64> {
    log_pdf(x, p).map(f64::exp)
}

#[inline]
pub(crate) fn log_pdf_unchecked(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + variance.ln()) - d * d / (2.0 * variance)
}

#[inline]
pub(crate) fn pdf_unchecked(x: f64, mean: f64, variance: f64) -> f64 {
    log_pdf_unchecked(x, mean, variance).exp()
}

/// Product of two normal densities in the same argument.
///
/// Returns `(log_scale, p)` with `φ(u; p1)·φ(u; p2) = exp(log_scale)·φ(u; p)`
/// for every `u`, where `exp(log_scale) = φ(μ₁ − μ₂; 0, σ₁² + σ₂²)`.
pub fn gaussian_product(p1: GaussParams, p2: GaussParams) -> Result<(f64, GaussParams)> {
    p1.validate()?;
    p2.validate()?;
    let total = p1.variance + p2.variance;
    let log_scale = log_pdf_unchecked(p1.mean - p2.mean, 0.0, total);
    let mean = (p1.variance * p2.mean + p2.variance * p1.mean) / total;
    let variance = p1.variance * p2.variance / total;
    Ok((log_scale, GaussParams { mean, variance }))
}

/// `φ(u; p)^k = exp(log_scale)·φ(u; p_out)` for `k ∈ {2, 3}`.
pub fn power_identity(p: GaussParams, k: u32) -> Result<(f64, GaussParams)> {
    p.validate()?;
    let v = p.variance;
    let log_scale = match k {
        // 1 / (2√(πσ²))
        2 => -(2.0f64.ln() + 0.5 * (PI * v).ln()),
        // 1 / (2√3·πσ²)
        3 => -(2.0f64.ln() + 0.5 * 3.0f64.ln() + (PI * v).ln()),
        _ => return Err(domain(format!("power identity is only defined for k in {{2, 3}}, got {k}"))),
    };
    Ok((log_scale, GaussParams { mean: p.mean, variance: v / f64::from(k) }))
}

/// Closed-form conditional kernel moments at one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondMoments {
    /// `E[K_h(Z(λ) − x) | Y, Z]`
    pub m0: f64,
    /// `E[(Z(λ) − x)·K_h(Z(λ) − x) | Y, Z]`
    pub m1: f64,
    /// `E[(Z(λ) − x)²·K_h(Z(λ) − x) | Y, Z]`
    pub m2: f64,
    pub evaluated_at: f64,
    pub surrogate: f64,
    pub bandwidth: f64,
    pub lambda: f64,
    pub sigma_u2: f64,
}

impl CondMoments {
    /// Shrinkage factor `r(λ, h) = h² / (h² + λσ_u²)`.
    pub fn shrinkage(&self) -> f64 {
        let h2 = self.bandwidth * self.bandwidth;
        h2 / (h2 + self.lambda * self.sigma_u2)
    }
}

/// Conditional moments of the Gaussian kernel under pseudo-noise of variance `λσ_u²`.
pub fn cond_moments(z: f64, x: f64, h: f64, lambda: f64, sigma_u2: f64) -> Result<CondMoments> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(domain(format!("bandwidth must be positive, got {h}")));
    }
    if !(lambda >= 0.0) {
        return Err(domain(format!("lambda must be nonnegative, got {lambda}")));
    }
    if !(sigma_u2 >= 0.0) {
        return Err(domain(format!("sigma_u2 must be nonnegative, got {sigma_u2}")));
    }
    let h2 = h * h;
    let added = lambda * sigma_u2;
    let var = h2 + added;
    let r = h2 / var;
    let m0 = pdf_unchecked(x, z, var);
    let d = z - x;
    Ok(CondMoments {
        m0,
        m1: r * d * m0,
        m2: (r * r * d * d + added * r) * m0,
        evaluated_at: x,
        surrogate: z,
        bandwidth: h,
        lambda,
        sigma_u2,
    })
}

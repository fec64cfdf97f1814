//! Quadrature evaluation of the large-sample quantities of the per-λ
//! estimator: the limit Γ(λ), the h² bias coefficient, pointwise and
//! cross-λ asymptotic variances, and the leading moment expansions of the
//! kernel sums.
//!
//! Every quantity is built from Gaussian-smoothed integrals
//! `∫ φ(t; x, v) p(t) w(t) f_X(t) dt` with `v = (λ+1)σ_u²` (or a related
//! variance), `p` a power of `t` or `t − x`, and `w ∈ {1, g, g², τ²}`.
//! x-derivatives act on the Gaussian factor only and are taken under the
//! integral with Hermite weights.

mod model;
mod quadrature;

pub use model::{BuiltinTruth, RealFn, TrueModel};
pub use quadrature::{gauss_legendre, integrate, QuadratureConfig, QuadratureRule};

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::gausskit::pdf_unchecked;

/// Which weight multiplies `f_X` in a weighted moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MomentKind {
    /// `f_{j,λ}`: weight 1.
    F,
    /// `g_{j,λ}`: weight `g`.
    GFun,
    /// `G_{j,λ}`: weight `g²`.
    G2,
    /// `H_{j,λ}`: weight `τ²`.
    Tau2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Weight {
    Kind(MomentKind),
    /// `g² + τ²`
    SecondMoment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Power {
    Raw(i32),
    Centered(i32),
}

/// Gaussian factor below 1e−16 of its peak beyond this many standard deviations.
const TRUNCATION_SDS: f64 = 8.6;
const INITIAL_PIECES: usize = 8;

fn weight_value(m: &TrueModel, w: Weight, t: f64) -> f64 {
    match w {
        Weight::Kind(MomentKind::F) => 1.0,
        Weight::Kind(MomentKind::GFun) => (m.g)(t),
        Weight::Kind(MomentKind::G2) => (m.g)(t).powi(2),
        Weight::Kind(MomentKind::Tau2) => (m.tau2)(t),
        Weight::SecondMoment => (m.g)(t).powi(2) + (m.tau2)(t),
    }
}

/// `∂ᵈ/∂xᵈ` (Gaussian factor only) of `∫ φ(t; x, var) p(t) w(t) f_X(t) dt`.
fn smooth(m: &TrueModel, w: Weight, p: Power, deriv: u32, x: f64, var: f64, q: &QuadratureConfig) -> Result<f64> {
    if var == 0.0 {
        if deriv > 0 {
            return Err(domain("x-derivatives of a moment are undefined at zero smoothing variance"));
        }
        let pw = match p {
            Power::Raw(j) => x.powi(j),
            Power::Centered(0) => 1.0,
            Power::Centered(_) => 0.0,
        };
        return Ok(pw * weight_value(m, w, x) * (m.f_x)(x));
    }
    let s = var.sqrt();
    let (a, b) = m.support;
    let lo = ((a - x) / s).max(-TRUNCATION_SDS);
    let hi = ((b - x) / s).min(TRUNCATION_SDS);
    let integrand = |u: f64| {
        let t = x + s * u;
        let d = match deriv {
            0 => 1.0,
            1 => u / s,
            _ => (u * u - 1.0) / var,
        };
        let pw = match p {
            Power::Raw(j) => t.powi(j),
            Power::Centered(j) => (s * u).powi(j),
        };
        pdf_unchecked(u, 0.0, 1.0) * d * pw * weight_value(m, w, t) * (m.f_x)(t)
    };
    integrate(integrand, lo, hi, INITIAL_PIECES, q)
}

fn smoothing_variance(m: &TrueModel, lambda: f64) -> Result<f64> {
    if !(lambda >= -1.0) || !lambda.is_finite() {
        return Err(domain(format!("lambda must be at least -1, got {lambda}")));
    }
    Ok(if lambda == -1.0 { 0.0 } else { (lambda + 1.0) * m.sigma_u2 })
}

/// `∫ φ(t; x, (λ+1)σ_u²) tʲ w(t) f_X(t) dt`; the pointwise limit
/// `xʲ w(x) f_X(x)` when the smoothing variance is zero.
pub fn weighted_moment(m: &TrueModel, which: MomentKind, j: u32, x: f64, lambda: f64, q: &QuadratureConfig) -> Result<f64> {
    weighted_moment_derivative(m, which, j, 0, x, lambda, q)
}

/// The `deriv`-th x-derivative (`deriv ≤ 2`) of [`weighted_moment`].
pub fn weighted_moment_derivative(
    m: &TrueModel,
    which: MomentKind,
    j: u32,
    deriv: u32,
    x: f64,
    lambda: f64,
    q: &QuadratureConfig,
) -> Result<f64> {
    q.validate()?;
    if deriv > 2 {
        return Err(domain("only derivatives up to order 2 are supported"));
    }
    let var = smoothing_variance(m, lambda)?;
    smooth(m, Weight::Kind(which), Power::Raw(j as i32), deriv, x, var, q)
}

fn positive_denominator(f0: f64, q: &QuadratureConfig, x: f64) -> Result<()> {
    if !(f0 > q.abs_tol) {
        return Err(domain(format!("smoothed density {f0:e} at x = {x} is below the quadrature floor")));
    }
    Ok(())
}

/// `Γ(λ) = g_{0,λ}(x) / f_{0,λ}(x)`, equal to `g(x)` at λ = −1.
pub fn gamma_limit(m: &TrueModel, x: f64, lambda: f64, q: &QuadratureConfig) -> Result<f64> {
    q.validate()?;
    let var = smoothing_variance(m, lambda)?;
    if var == 0.0 {
        return Ok((m.g)(x));
    }
    let f0 = smooth(m, Weight::Kind(MomentKind::F), Power::Raw(0), 0, x, var, q)?;
    positive_denominator(f0, q, x)?;
    let g0 = smooth(m, Weight::Kind(MomentKind::GFun), Power::Raw(0), 0, x, var, q)?;
    Ok(g0 / f0)
}

/// Coefficient `B(x; λ)` of `h²` in the expansion of the per-λ estimator
/// around `Γ(λ)`. At zero smoothing variance this is `g″(x)/2`.
pub fn bias_coefficient(m: &TrueModel, x: f64, lambda: f64, q: &QuadratureConfig) -> Result<f64> {
    q.validate()?;
    let var = smoothing_variance(m, lambda)?;
    if var == 0.0 {
        return match &m.g_second {
            Some(g2) => Ok(0.5 * g2(x)),
            None => Err(domain("bias at zero smoothing variance needs an analytic g''")),
        };
    }
    let f = Weight::Kind(MomentKind::F);
    let g = Weight::Kind(MomentKind::GFun);
    let f0 = smooth(m, f, Power::Raw(0), 0, x, var, q)?;
    positive_denominator(f0, q, x)?;
    let g0 = smooth(m, g, Power::Raw(0), 0, x, var, q)?;
    let f0dd = smooth(m, f, Power::Raw(0), 2, x, var, q)?;
    let g0dd = smooth(m, g, Power::Raw(0), 2, x, var, q)?;
    let f1c = smooth(m, f, Power::Centered(1), 0, x, var, q)?;
    let g1c = smooth(m, g, Power::Centered(1), 0, x, var, q)?;
    Ok((f0 * g0dd - f0dd * g0) / (2.0 * f0 * f0) + f1c * (g0 * f1c - f0 * g1c) / (var * var * f0.powi(3)))
}

/// Weights of the linearised estimator and the moments they are built from.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentCoefficients {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub d0: f64,
    pub d1: f64,
    /// `[f₀, f₁, f₂]` at `(x, λ)`.
    pub f_moms: [f64; 3],
    /// `[g₀, g₁]`.
    pub g_moms: [f64; 2],
    /// `[G₀]`.
    pub g2_moms: [f64; 1],
    /// `[H₀]`.
    pub h_moms: [f64; 1],
}

/// `c_{jλ}(x)`, `d_{jλ}(x)` and the underlying moments. Needs `(λ+1)σ_u² > 0`.
pub fn moment_coefficients(m: &TrueModel, x: f64, lambda: f64, q: &QuadratureConfig) -> Result<MomentCoefficients> {
    q.validate()?;
    let var = smoothing_variance(m, lambda)?;
    if var == 0.0 {
        return Err(domain("moment coefficients need a positive smoothing variance"));
    }
    let mom = |w: MomentKind, p: Power| smooth(m, Weight::Kind(w), p, 0, x, var, q);
    let f = [mom(MomentKind::F, Power::Raw(0))?, mom(MomentKind::F, Power::Raw(1))?, mom(MomentKind::F, Power::Raw(2))?];
    positive_denominator(f[0], q, x)?;
    let g = [mom(MomentKind::GFun, Power::Raw(0))?, mom(MomentKind::GFun, Power::Raw(1))?];
    let f1c = mom(MomentKind::F, Power::Centered(1))?;
    let g1c = mom(MomentKind::GFun, Power::Centered(1))?;
    let f0 = f[0];
    Ok(MomentCoefficients {
        c0: -g[0] / (f0 * f0),
        c1: (2.0 * f1c * g[0] - g1c * f0) / (var * f0.powi(3)),
        c2: (f1c * g1c * f0 - f1c * f1c * g[0]) / (var * var * f0.powi(4)),
        d0: 1.0 / f0,
        d1: -f1c / (var * f0 * f0),
        f_moms: f,
        g_moms: g,
        g2_moms: [mom(MomentKind::G2, Power::Raw(0))?],
        h_moms: [mom(MomentKind::Tau2, Power::Raw(0))?],
    })
}

fn check_variance(value: f64, magnitude: f64, q: &QuadratureConfig, what: &str) -> Result<f64> {
    if value < -10.0 * (q.abs_tol + q.rel_tol * magnitude) {
        return Err(Error::Consistency(format!("{what} evaluated to {value:e}, below zero beyond quadrature tolerance")));
    }
    Ok(value)
}

/// Asymptotic variance `Δ_{λ,λ}(x)` of `√n·ĝ(x; λ)` for λ > 0, or
/// `Δ_{0,0}(x)` of `√(nh)·ĝ(x; 0)` for λ = 0.
pub fn variance_delta(m: &TrueModel, x: f64, lambda: f64, q: &QuadratureConfig) -> Result<f64> {
    q.validate()?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(domain(format!("lambda must be nonnegative, got {lambda}")));
    }
    let f = Weight::Kind(MomentKind::F);
    let g = Weight::Kind(MomentKind::GFun);
    let sm = Weight::SecondMoment;
    let s2 = m.sigma_u2;
    if lambda == 0.0 {
        let f00 = smooth(m, f, Power::Raw(0), 0, x, s2, q)?;
        positive_denominator(f00, q, x)?;
        let g00 = smooth(m, g, Power::Raw(0), 0, x, s2, q)?;
        let m00 = smooth(m, sm, Power::Raw(0), 0, x, s2, q)?;
        let (a, b) = (m00 / (f00 * f00), g00 * g00 / f00.powi(3));
        return check_variance((a - b) / (2.0 * PI.sqrt()), a.abs() + b.abs(), q, "variance_delta");
    }
    if s2 == 0.0 {
        return Err(domain("variance at lambda > 0 needs sigma_u2 > 0"));
    }
    let var = (lambda + 1.0) * s2;
    let half = (lambda / 2.0 + 1.0) * s2;
    let f0 = smooth(m, f, Power::Raw(0), 0, x, var, q)?;
    positive_denominator(f0, q, x)?;
    let g0 = smooth(m, g, Power::Raw(0), 0, x, var, q)?;
    let fh = smooth(m, f, Power::Raw(0), 0, x, half, q)?;
    let gh = smooth(m, g, Power::Raw(0), 0, x, half, q)?;
    let mh = smooth(m, sm, Power::Raw(0), 0, x, half, q)?;
    let k = 2.0 * (PI * lambda * s2).sqrt();
    let (c0, d0) = (-g0 / (f0 * f0), 1.0 / f0);
    let terms = [
        c0 * c0 * (fh / k - f0 * f0),
        d0 * d0 * (mh / k - g0 * g0),
        2.0 * c0 * d0 * (gh / k - g0 * f0),
    ];
    let magnitude = c0 * c0 * fh / k + d0 * d0 * mh / k + (2.0 * c0 * d0 * gh / k).abs();
    check_variance(terms.iter().sum(), magnitude, q, "variance_delta")
}

/// Asymptotic covariance matrix `Δ_{λᵢλⱼ}(x)` of `√n·ĝ(x; λ)` across a
/// strictly ascending grid of positive λ.
pub fn cross_covariance(m: &TrueModel, x: f64, lambdas: &[f64], q: &QuadratureConfig) -> Result<Vec<Vec<f64>>> {
    q.validate()?;
    if lambdas.is_empty() || !(lambdas[0] > 0.0) || lambdas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(domain("cross covariance needs a strictly ascending grid of positive lambdas"));
    }
    if lambdas.iter().any(|l| !l.is_finite()) {
        return Err(domain("lambdas must be finite"));
    }
    let s2 = m.sigma_u2;
    if s2 == 0.0 {
        return Err(domain("cross covariance needs sigma_u2 > 0"));
    }
    let f = Weight::Kind(MomentKind::F);
    let g = Weight::Kind(MomentKind::GFun);
    let mut base = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let var = (l + 1.0) * s2;
        let f0 = smooth(m, f, Power::Raw(0), 0, x, var, q)?;
        positive_denominator(f0, q, x)?;
        let g0 = smooth(m, g, Power::Raw(0), 0, x, var, q)?;
        base.push((f0, g0, -g0 / (f0 * f0), 1.0 / f0));
    }
    let k = lambdas.len();
    let mut out = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let (li, lj) = (lambdas[i], lambdas[j]);
            let kv = (li * lj / (li + lj) + 1.0) * s2;
            let pre = 1.0 / (2.0 * PI * (li + lj) * s2).sqrt();
            let i_f = pre * smooth(m, f, Power::Raw(0), 0, x, kv, q)?;
            let i_g = pre * smooth(m, g, Power::Raw(0), 0, x, kv, q)?;
            let i_m = pre * smooth(m, Weight::SecondMoment, Power::Raw(0), 0, x, kv, q)?;
            let (fi, gi, ci, di) = base[i];
            let (fj, gj, cj, dj) = base[j];
            let v = ci * cj * (i_f - fi * fj)
                + ci * dj * (i_g - fi * gj)
                + cj * di * (i_g - fj * gi)
                + di * dj * (i_m - gi * gj);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    Ok(out)
}

/// Γ, B and Δ at one `(x, λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticSummary {
    pub x: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub bias2: f64,
    pub var_point: f64,
    pub cross: Option<Vec<Vec<f64>>>,
}

pub fn asymptotic_summary(m: &TrueModel, x: f64, lambda: f64, q: &QuadratureConfig) -> Result<AsymptoticSummary> {
    Ok(AsymptoticSummary {
        x,
        lambda,
        gamma: gamma_limit(m, x, lambda, q)?,
        bias2: bias_coefficient(m, x, lambda, q)?,
        var_point: variance_delta(m, x, lambda, q)?,
        cross: None,
    })
}

/// Summaries over `x_grid × lambdas`, ordered by x then λ.
pub fn diagnose_grid(m: &TrueModel, x_grid: &[f64], lambdas: &[f64], q: &QuadratureConfig) -> Result<Vec<AsymptoticSummary>> {
    let cells: Vec<(f64, f64)> = x_grid.iter().flat_map(|&x| lambdas.iter().map(move |&l| (x, l))).collect();
    cells.par_iter().map(|&(x, l)| asymptotic_summary(m, x, l, q)).collect()
}

/// Predicted mean and variance of one kernel sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentPrediction {
    pub mean: f64,
    pub variance: f64,
}

/// Leading-order moments of the conditional-moment sums at `(x, λ, h, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaPredictions {
    /// `S̃₀, S̃₁, S̃₂`: leading mean and variance terms.
    pub s: [MomentPrediction; 3],
    /// `T̃₀, T̃₁`.
    pub t: [MomentPrediction; 2],
    /// Means of `A₀, A₁, A₂` expanded through `h²`.
    pub a_mean: [f64; 3],
    /// Means of `B₀, B₁` expanded through `h²`.
    pub b_mean: [f64; 2],
    /// Exact finite-h means of `A_j` (smoothing variance `h² + (λ+1)σ_u²`).
    pub a_mean_exact: [f64; 3],
    pub b_mean_exact: [f64; 2],
}

/// Predicted means and variances of the kernel sums. Requires `σ_u² > 0`.
pub fn lemma_moment_predictions(
    m: &TrueModel,
    x: f64,
    lambda: f64,
    h: f64,
    n: usize,
    q: &QuadratureConfig,
) -> Result<LemmaPredictions> {
    q.validate()?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(domain(format!("lambda must be nonnegative, got {lambda}")));
    }
    if !(h > 0.0) || n == 0 {
        return Err(domain("need h > 0 and n >= 1"));
    }
    let s2 = m.sigma_u2;
    if !(s2 > 0.0) {
        return Err(domain("moment predictions need sigma_u2 > 0"));
    }
    let f = Weight::Kind(MomentKind::F);
    let g = Weight::Kind(MomentKind::GFun);
    let sm = Weight::SecondMoment;
    let (h2, nf) = (h * h, n as f64);
    let var = (lambda + 1.0) * s2;
    let d0 = h2 + lambda * s2;
    let d1 = h2 + var;
    let sm_ = |w: Weight, p: Power, d: u32, v: f64| smooth(m, w, p, d, x, v, q);

    let f0 = sm_(f, Power::Raw(0), 0, var)?;
    positive_denominator(f0, q, x)?;
    let f0dd = sm_(f, Power::Raw(0), 2, var)?;
    let f1c = sm_(f, Power::Centered(1), 0, var)?;
    let f1cdd = sm_(f, Power::Centered(1), 2, var)?;
    let f2c = sm_(f, Power::Centered(2), 0, var)?;
    let f2cdd = sm_(f, Power::Centered(2), 2, var)?;
    let g0 = sm_(g, Power::Raw(0), 0, var)?;
    let g0dd = sm_(g, Power::Raw(0), 2, var)?;
    let g1c = sm_(g, Power::Centered(1), 0, var)?;
    let g1cdd = sm_(g, Power::Centered(1), 2, var)?;

    let big_f0 = f0 + 0.5 * h2 * f0dd;
    let shrink = d0 / d1;
    let a_mean = [
        big_f0,
        shrink * (f1c + 0.5 * h2 * f1cdd),
        shrink * shrink * (f2c + 0.5 * h2 * f2cdd) + s2 * shrink * big_f0,
    ];
    let b_mean = [g0 + 0.5 * h2 * g0dd, shrink * (g1c + 0.5 * h2 * g1cdd)];

    let e0 = sm_(f, Power::Raw(0), 0, d1)?;
    let a_mean_exact = [
        e0,
        shrink * sm_(f, Power::Centered(1), 0, d1)?,
        shrink * shrink * sm_(f, Power::Centered(2), 0, d1)? + s2 * shrink * e0,
    ];
    let b_mean_exact = [sm_(g, Power::Raw(0), 0, d1)?, shrink * sm_(g, Power::Centered(1), 0, d1)?];

    let means = [big_f0, h2 / var * f1c, h2 * f0, b_mean[0], h2 / var * g1c];
    let variances = if lambda > 0.0 {
        let half = (lambda / 2.0 + 1.0) * s2;
        let k = 2.0 * (PI * lambda * s2).sqrt();
        let fh0 = sm_(f, Power::Raw(0), 0, half)?;
        let fh2c = sm_(f, Power::Centered(2), 0, half)?;
        let mh0 = sm_(sm, Power::Raw(0), 0, half)?;
        let mh2c = sm_(sm, Power::Centered(2), 0, half)?;
        let h4 = h2 * h2;
        let l2 = lambda + 2.0;
        [
            (fh0 / k - f0 * f0) / nf,
            h4 / (nf * k * l2 * l2 * s2 * s2) * fh2c + h4 / (nf * k * lambda * l2 * s2) * fh0
                - h4 / (nf * var * var) * f1c * f1c,
            h4 / nf * (fh0 / k - f0 * f0),
            (mh0 / k - g0 * g0) / nf,
            h4 / (nf * k * l2 * l2 * s2 * s2) * mh2c + h4 / (nf * k * lambda * l2 * s2) * mh0
                - h4 / (nf * var * var) * g1c * g1c,
        ]
    } else {
        let sp = PI.sqrt();
        let m00 = sm_(sm, Power::Raw(0), 0, var)?;
        [
            f0 / (2.0 * nf * h * sp) - f0 * f0 / nf,
            h * f0 / (4.0 * nf * sp),
            3.0 * h.powi(3) * f0 / (8.0 * nf * sp),
            m00 / (2.0 * nf * h * sp),
            h * m00 / (4.0 * nf * sp),
        ]
    };
    let p = |i: usize| MomentPrediction { mean: means[i], variance: variances[i] };
    Ok(LemmaPredictions { s: [p(0), p(1), p(2)], t: [p(3), p(4)], a_mean, b_mean, a_mean_exact, b_mean_exact })
}

#[cfg(test)]
mod tests;

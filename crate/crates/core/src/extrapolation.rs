//! Trend fitting in λ and extrapolation to λ = −1.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, Error, Result};
use crate::locallinear::LambdaProfile;

/// Smallest admissible distance of the rational pole from λ = −1.
pub const POLE_MARGIN: f64 = 1e-3;
/// Upper end of the rational `c` search.
pub const C_MAX: f64 = 1e6;
/// Relative tolerance of the golden-section search in `c`.
pub const C_REL_TOL: f64 = 1e-10;
/// Minimum relative RSS gain (as a fraction of the centred total sum of
/// squares) for a rational fit to be preferred over the quadratic.
pub const RATIONAL_MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ExtrapolantFamily {
    #[default]
    Quadratic,
    /// Polynomial of order `p ≥ 1`.
    Polynomial(u32),
    /// `a + b/(c + λ)` with `c > 1`.
    Rational,
}

impl ExtrapolantFamily {
    pub fn min_points(self) -> usize {
        match self {
            ExtrapolantFamily::Quadratic => 3,
            ExtrapolantFamily::Polynomial(p) => p as usize + 1,
            ExtrapolantFamily::Rational => 4,
        }
    }
}


impl fmt::Display for ExtrapolantFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtrapolantFamily::Quadratic => write!(f, "quadratic"),
            ExtrapolantFamily::Polynomial(p) => write!(f, "poly:{p}"),
            ExtrapolantFamily::Rational => write!(f, "rational"),
        }
    }
}

impl FromStr for ExtrapolantFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "quadratic" => return Ok(ExtrapolantFamily::Quadratic),
            "rational" => return Ok(ExtrapolantFamily::Rational),
            _ => {}
        }
        if let Some(p) = t.strip_prefix("poly:") {
            let p: u32 = p.parse().map_err(|_| domain(format!("bad polynomial order in '{s}'")))?;
            if p == 0 {
                return Err(domain("polynomial order must be at least 1"));
            }
            return Ok(ExtrapolantFamily::Polynomial(p));
        }
        Err(domain(format!("unknown extrapolant '{s}' (expected quadratic, poly:<p> or rational)")))
    }
}

impl Serialize for ExtrapolantFamily {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ExtrapolantFamily {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A fitted trend in λ.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolantFit {
    pub family: ExtrapolantFamily,
    /// Polynomial: ascending powers. Rational: `[a, b, c]`.
    pub coefficients: Vec<f64>,
    pub rss: f64,
    pub extrapolated: f64,
    /// A rational fit was requested but the quadratic was returned.
    pub fallback_used: bool,
}

impl ExtrapolantFit {
    /// Value of the fitted trend at `lambda`.
    pub fn evaluate(&self, lambda: f64) -> f64 {
        match self.family {
            ExtrapolantFamily::Rational => {
                let [a, b, c] = [self.coefficients[0], self.coefficients[1], self.coefficients[2]];
                a + b / (c + lambda)
            }
            _ => self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * lambda + c),
        }
    }
}

fn check_points(lambdas: &[f64], values: &[f64], min: usize) -> Result<()> {
    if lambdas.len() != values.len() {
        return Err(domain(format!("{} lambdas but {} values", lambdas.len(), values.len())));
    }
    if lambdas.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(domain("non-finite lambda or value"));
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let distinct = 1 + sorted.windows(2).filter(|w| w[1] != w[0]).count();
    if lambdas.is_empty() || distinct < min {
        return Err(domain(format!("need at least {min} distinct lambda points, got {}", if lambdas.is_empty() { 0 } else { distinct })));
    }
    Ok(())
}

/// Least-squares polynomial of order `p` through `(lambdas, values)`, solved
/// by Householder QR.
pub fn fit_polynomial(lambdas: &[f64], values: &[f64], p: u32) -> Result<ExtrapolantFit> {
    if p == 0 {
        return Err(domain("polynomial order must be at least 1"));
    }
    let cols = p as usize + 1;
    check_points(lambdas, values, cols)?;
    let m = lambdas.len();
    let design = DMatrix::from_fn(m, cols, |i, j| lambdas[i].powi(j as i32));
    let rhs = DVector::from_column_slice(values);
    let qr = design.clone().qr();
    let r = qr.r();
    let rmax = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..cols).any(|i| !(r[(i, i)].abs() > 1e-13 * rmax)) {
        return Err(domain("polynomial design is rank deficient"));
    }
    let qtb = qr.q().transpose() * &rhs;
    let coef = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| domain("polynomial design is rank deficient"))?;
    let resid = &design * &coef - &rhs;
    let family = if p == 2 { ExtrapolantFamily::Quadratic } else { ExtrapolantFamily::Polynomial(p) };
    let mut fit = ExtrapolantFit {
        family,
        coefficients: coef.iter().copied().collect(),
        rss: resid.norm_squared(),
        extrapolated: 0.0,
        fallback_used: false,
    };
    fit.extrapolated = fit.evaluate(-1.0);
    Ok(fit)
}

/// Least-squares `(a, b, rss)` of `a + b·u` with `uᵢ = 1/(c + λᵢ)`.
fn profile_ab(lambdas: &[f64], values: &[f64], c: f64) -> (f64, f64, f64) {
    let m = lambdas.len() as f64;
    let u: Vec<f64> = lambdas.iter().map(|&l| 1.0 / (c + l)).collect();
    let u_bar = u.iter().sum::<f64>() / m;
    let y_bar = values.iter().sum::<f64>() / m;
    let (mut suu, mut suy) = (0.0, 0.0);
    for (&ui, &yi) in u.iter().zip(values) {
        suu += (ui - u_bar) * (ui - u_bar);
        suy += (ui - u_bar) * (yi - y_bar);
    }
    let b = if suu > 0.0 { suy / suu } else { 0.0 };
    let a = y_bar - b * u_bar;
    let rss = u.iter().zip(values).map(|(&ui, &yi)| (yi - a - b * ui).powi(2)).sum();
    (a, b, rss)
}

/// Least-squares fit of `a + b/(c + λ)` with `c ∈ (1 + POLE_MARGIN, C_MAX]`.
///
/// `(a, b)` are profiled out for each `c`; `c` is located by a coarse scan in
/// `ln(c − 1)` followed by golden-section refinement. Falls back to the
/// quadratic when the optimum sits on a bound or does not beat it.
pub fn fit_rational(lambdas: &[f64], values: &[f64]) -> Result<ExtrapolantFit> {
    check_points(lambdas, values, 4)?;
    let quadratic = fit_polynomial(lambdas, values, 2)?;
    let fallback = || ExtrapolantFit { fallback_used: true, ..quadratic.clone() };

    let objective = |u: f64| profile_ab(lambdas, values, 1.0 + u.exp()).2;
    let (lo, hi) = (POLE_MARGIN.ln(), (C_MAX - 1.0).ln());
    const SCAN: usize = 240;
    let grid: Vec<f64> = (0..=SCAN).map(|i| lo + (hi - lo) * i as f64 / SCAN as f64).collect();
    let scores: Vec<f64> = grid.iter().map(|&u| objective(u)).collect();
    let best = (0..=SCAN).min_by(|&i, &j| scores[i].total_cmp(&scores[j])).unwrap_or(0);
    if best == 0 || best == SCAN {
        return Ok(fallback());
    }

    let u_star = golden_section(objective, grid[best - 1], grid[best + 1], C_REL_TOL);
    let c = 1.0 + u_star.exp();
    let (a, b, rss) = profile_ab(lambdas, values, c);

    let m = values.len() as f64;
    let y_bar = values.iter().sum::<f64>() / m;
    let tss: f64 = values.iter().map(|v| (v - y_bar).powi(2)).sum();
    if !(quadratic.rss - rss > RATIONAL_MIN_GAIN * tss) || !a.is_finite() || !b.is_finite() {
        return Ok(fallback());
    }
    Ok(ExtrapolantFit {
        family: ExtrapolantFamily::Rational,
        coefficients: vec![a, b, c],
        rss,
        extrapolated: a + b / (c - 1.0),
        fallback_used: false,
    })
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if (b - a).abs() <= tol * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 { x1 } else { x2 }
}

/// Fits one family to `(lambdas, values)`.
pub fn fit_family(lambdas: &[f64], values: &[f64], family: ExtrapolantFamily) -> Result<ExtrapolantFit> {
    match family {
        ExtrapolantFamily::Quadratic => fit_polynomial(lambdas, values, 2),
        ExtrapolantFamily::Polynomial(p) => fit_polynomial(lambdas, values, p),
        ExtrapolantFamily::Rational => fit_rational(lambdas, values),
    }
}

/// Per-x extrapolation of a profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolation {
    pub x_grid: Vec<f64>,
    /// Extrapolated value per x; NaN where the row was missing.
    pub curve: Vec<f64>,
    /// `None` where too few usable λ cells remained.
    pub fits: Vec<Option<ExtrapolantFit>>,
}

impl Extrapolation {
    pub fn missing(&self) -> usize {
        self.fits.iter().filter(|f| f.is_none()).count()
    }
}

/// Fits `family` to every x row of `profile.g_hat` and evaluates at λ = −1.
pub fn extrapolate_profile(profile: &LambdaProfile, family: ExtrapolantFamily) -> Result<Extrapolation> {
    extrapolate_rows(profile, family, false)
}

/// As [`extrapolate_profile`] but on the slope estimates `g_prime_hat`.
pub fn extrapolate_derivative_profile(profile: &LambdaProfile, family: ExtrapolantFamily) -> Result<Extrapolation> {
    extrapolate_rows(profile, family, true)
}

fn extrapolate_rows(profile: &LambdaProfile, family: ExtrapolantFamily, derivative: bool) -> Result<Extrapolation> {
    if let ExtrapolantFamily::Polynomial(0) = family {
        return Err(domain("polynomial order must be at least 1"));
    }
    let need = family.min_points();
    if profile.n_lambda() < need {
        return Err(domain(format!(
            "{} profile has {} lambda points; {family} extrapolation needs {need}",
            profile.method.label(),
            profile.n_lambda()
        )));
    }
    let fits: Vec<Option<ExtrapolantFit>> = (0..profile.n_x())
        .into_par_iter()
        .map(|j| {
            let row = if derivative { profile.derivative_row(j) } else { profile.row(j) };
            let (lams, vals): (Vec<f64>, Vec<f64>) = (0..profile.n_lambda())
                .filter(|&k| profile.cell_usable(j, k) && row[k].is_finite())
                .map(|k| (profile.lambda_grid[k], row[k]))
                .unzip();
            if lams.len() < need {
                return None;
            }
            fit_family(&lams, &vals, family).ok()
        })
        .collect();
    let curve = fits.iter().map(|f| f.as_ref().map_or(f64::NAN, |f| f.extrapolated)).collect();
    Ok(Extrapolation { x_grid: profile.x_grid.clone(), curve, fits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locallinear::{LambdaProfile, Method};
    use proptest::prelude::*;

    fn grid() -> Vec<f64> {
        (0..=10).map(|k| k as f64 / 5.0).collect()
    }

    fn profile(rows: Vec<Vec<f64>>, lambdas: Vec<f64>, method: Method) -> LambdaProfile {
        let k = lambdas.len();
        let n = rows.len();
        LambdaProfile {
            x_grid: (0..n).map(|j| j as f64).collect(),
            lambda_grid: lambdas,
            g_prime_hat: rows.iter().flatten().map(|v| 2.0 * v).collect(),
            g_hat: rows.into_iter().flatten().collect(),
            degenerate: vec![0; n * k],
            fits_per_cell: vec![1; k],
            method,
        }
    }

    #[test]
    fn family_parsing_round_trips() {
        for f in [ExtrapolantFamily::Quadratic, ExtrapolantFamily::Polynomial(3), ExtrapolantFamily::Rational] {
            assert_eq!(f.to_string().parse::<ExtrapolantFamily>().unwrap(), f);
            let json = serde_json::to_string(&f).unwrap();
            assert_eq!(serde_json::from_str::<ExtrapolantFamily>(&json).unwrap(), f);
        }
        assert!("poly:0".parse::<ExtrapolantFamily>().is_err());
        assert!("poly:x".parse::<ExtrapolantFamily>().is_err());
        assert!("cubic".parse::<ExtrapolantFamily>().is_err());
    }

    #[test]
    fn constant_values() {
        let l = grid();
        let v = vec![1.75; l.len()];
        let fit = fit_polynomial(&l, &v, 2).unwrap();
        assert_eq!(fit.family, ExtrapolantFamily::Quadratic);
        assert!((fit.coefficients[0] - 1.75).abs() < 1e-12);
        assert!(fit.coefficients[1].abs() < 1e-12 && fit.coefficients[2].abs() < 1e-12);
        assert!((fit.extrapolated - 1.75).abs() < 1e-12);
        let r = fit_rational(&l, &v).unwrap();
        assert!(r.fallback_used);
        assert_eq!(r.family, ExtrapolantFamily::Quadratic);
        assert!((r.extrapolated - 1.75).abs() < 1e-12);
    }

    #[test]
    fn exact_quadratic() {
        let l = grid();
        let v: Vec<f64> = l.iter().map(|x| 1.0 + 2.0 * x - 0.5 * x * x).collect();
        let fit = fit_polynomial(&l, &v, 2).unwrap();
        for (c, e) in fit.coefficients.iter().zip([1.0, 2.0, -0.5]) {
            assert!((c - e).abs() < 1e-10);
        }
        assert!((fit.extrapolated + 1.5).abs() < 1e-10);
        assert!(fit.rss < 1e-10);
    }

    #[test]
    fn cubic_matches_exact_normal_equations() {
        let l = grid();
        let v = [1.03, 1.37, 1.62, 1.97, 2.21, 2.38, 2.61, 2.70, 2.93, 2.98, 3.12];
        let fit = fit_polynomial(&l, &v, 3).unwrap();
        let want = [
            1.022447552447552447552448,
            1.796911421911421911421911,
            -0.465472027972027972027972,
            0.04443473193473193473193473,
        ];
        for (c, w) in fit.coefficients.iter().zip(want) {
            assert!((c - w).abs() < 1e-8 * w.abs(), "{c} vs {w}");
        }
        assert!((fit.extrapolated + 1.284370629370629370629371).abs() < 1e-8 * 1.2843706);
    }

    #[test]
    fn polynomial_errors() {
        assert!(fit_polynomial(&[0.0, 0.0, 0.0, 1.0], &[1.0, 2.0, 3.0, 4.0], 2).is_err());
        assert!(fit_polynomial(&[0.0, 1.0], &[1.0, 2.0], 2).is_err());
        assert!(fit_polynomial(&[0.0, 1.0, 2.0], &[1.0, 2.0], 1).is_err());
        assert!(fit_polynomial(&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0], 0).is_err());
        assert!(fit_rational(&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn exact_rational_member() {
        let l = grid();
        let v: Vec<f64> = l.iter().map(|x| 2.0 + 3.0 / (1.5 + x)).collect();
        let fit = fit_rational(&l, &v).unwrap();
        assert!(!fit.fallback_used);
        assert_eq!(fit.family, ExtrapolantFamily::Rational);
        for (c, e) in fit.coefficients.iter().zip([2.0, 3.0, 1.5]) {
            assert!((c - e).abs() < 1e-6, "{:?}", fit.coefficients);
        }
        assert!((fit.extrapolated - 8.0).abs() < 1e-6);
        assert!((fit.evaluate(-1.0) - fit.extrapolated).abs() < 1e-12);
    }

    #[test]
    fn attenuation_curve() {
        let (beta, sx2, su2) = (2.0, 1.0, 0.25);
        let l = grid();
        let v: Vec<f64> = l.iter().map(|x| beta * sx2 / (sx2 + (1.0 + x) * su2)).collect();
        let fit = fit_rational(&l, &v).unwrap();
        assert!(!fit.fallback_used);
        assert!((fit.extrapolated - beta).abs() < 1e-6, "{}", fit.extrapolated);
        // The quadratic is visibly biased on this curve.
        assert!((fit_polynomial(&l, &v, 2).unwrap().extrapolated - beta).abs() > 1e-3);
    }

    #[test]
    fn rational_pole_stays_left_of_minus_one() {
        let l = grid();
        let v: Vec<f64> = l.iter().map(|x| 1.0 / (1.0002 + x)).collect();
        let fit = fit_rational(&l, &v).unwrap();
        if fit.family == ExtrapolantFamily::Rational {
            assert!(fit.coefficients[2] > 1.0 + POLE_MARGIN * 0.999);
        }
        assert!(fit.extrapolated.is_finite());
    }

    #[test]
    fn profile_rows_fit_independently() {
        let l = grid();
        let p = profile(vec![vec![3.0; 11], l.iter().map(|x| 1.0 + x * x).collect()], l.clone(), Method::Ex);
        let e = extrapolate_profile(&p, ExtrapolantFamily::Quadratic).unwrap();
        assert!((e.curve[0] - 3.0).abs() < 1e-12);
        assert!((e.curve[1] - 2.0).abs() < 1e-10);
        assert_eq!(e.missing(), 0);
        let d = extrapolate_derivative_profile(&p, ExtrapolantFamily::Quadratic).unwrap();
        assert!((d.curve[1] - 4.0).abs() < 1e-10);

        let single = profile(vec![l.iter().map(|x| 2.0 + 3.0 / (1.5 + x)).collect()], l.clone(), Method::Ex);
        let e = extrapolate_profile(&single, ExtrapolantFamily::Rational).unwrap();
        assert_eq!(e.fits[0].as_ref().unwrap(), &fit_rational(&l, single.row(0)).unwrap());
    }

    #[test]
    fn naive_profile_is_rejected() {
        let p = profile(vec![vec![1.0]], vec![0.0], Method::Naive);
        for f in [ExtrapolantFamily::Quadratic, ExtrapolantFamily::Polynomial(1), ExtrapolantFamily::Rational] {
            assert!(extrapolate_profile(&p, f).is_err());
        }
    }

    #[test]
    fn degenerate_cells_are_skipped_or_marked() {
        let l = grid();
        let mut p = profile(vec![vec![5.0; 11], vec![7.0; 11]], l, Method::Simex);
        p.fits_per_cell = vec![2; 11];
        // Row 0: two cells fully degenerate (dropped) and one partially.
        p.degenerate[0] = 2;
        p.degenerate[1] = 2;
        p.degenerate[2] = 1;
        p.g_hat[0] = 1e9;
        p.g_hat[1] = -1e9;
        // Row 1: only two usable cells left.
        for k in 2..11 {
            p.degenerate[11 + k] = 2;
        }
        let e = extrapolate_profile(&p, ExtrapolantFamily::Quadratic).unwrap();
        assert!((e.curve[0] - 5.0).abs() < 1e-9);
        assert!(e.fits[1].is_none() && e.curve[1].is_nan());
        assert_eq!(e.missing(), 1);
    }

    proptest! {
        #[test]
        fn polynomial_recovers_members(c in prop::collection::vec(-5.0..5.0f64, 2..5)) {
            let l = grid();
            let p = c.len() as u32 - 1;
            let v: Vec<f64> = l.iter().map(|x| c.iter().rev().fold(0.0, |a, ci| a * x + ci)).collect();
            let fit = fit_polynomial(&l, &v, p).unwrap();
            prop_assert!(fit.rss < 1e-10);
            for (a, b) in fit.coefficients.iter().zip(&c) {
                prop_assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn polynomial_is_affine_equivariant(v in prop::collection::vec(-3.0..3.0f64, 11), s in -4.0..4.0f64, t in -10.0..10.0f64, p in 1u32..5) {
            let l = grid();
            let base = fit_polynomial(&l, &v, p).unwrap().extrapolated;
            let moved: Vec<f64> = v.iter().map(|x| s * x + t).collect();
            let got = fit_polynomial(&l, &moved, p).unwrap().extrapolated;
            prop_assert!((got - (s * base + t)).abs() < 1e-8 * (1.0 + (s * base).abs() + t.abs()));
        }

        #[test]
        fn rational_members_extrapolate(a in -3.0..3.0f64, b in 0.5..5.0f64, c in 1.2..6.0f64) {
            let l = grid();
            let v: Vec<f64> = l.iter().map(|x| a + b / (c + x)).collect();
            let fit = fit_rational(&l, &v).unwrap();
            prop_assert!(!fit.fallback_used);
            prop_assert!((fit.extrapolated - (a + b / (c - 1.0))).abs() < 1e-6 * (1.0 + (b / (c - 1.0)).abs()));
        }
    }
}

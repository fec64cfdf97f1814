use rayon::prelude::*;

use super::types::{LambdaProfile, Method, ObservedSample, PointFit, SmootherConfig, DEFAULT_DET_FLOOR};
use super::{check_bandwidth, check_grid, min_sq_dist};
use crate::error::{domain, Result};

/// Gaussian local-linear fit of `y` on `z` at `x`, written as the direct
/// ratio of kernel sums.
pub(crate) fn local_linear(z: &[f64], y: &[f64], x: f64, h: f64, det_floor: f64) -> PointFit {
    let d2_min = min_sq_dist(z, x);
    let inv_2h2 = 0.5 / (h * h);
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&zi, &yi) in z.iter().zip(y) {
        let d = zi - x;
        let k = (-(d * d - d2_min) * inv_2h2).exp();
        s0 += k;
        s1 += k * d;
        s2 += k * d * d;
        t0 += k * yi;
        t1 += k * d * yi;
    }
    let den = s2 * s0 - s1 * s1;
    if !(den > det_floor * s0 * s2) || !den.is_finite() {
        return PointFit { g_hat: t0 / s0, g_prime_hat: 0.0, degenerate: true };
    }
    PointFit { g_hat: (s2 * t0 - s1 * t1) / den, g_prime_hat: (s0 * t1 - s1 * t0) / den, degenerate: false }
}

/// Naive local-linear estimate, treating `Z` as if it were the true covariate.
pub fn naive_fit(s: &ObservedSample, x: f64, h: f64) -> Result<PointFit> {
    check_bandwidth(h)?;
    if !x.is_finite() {
        return Err(domain(format!("evaluation point must be finite, got {x}")));
    }
    Ok(local_linear(s.z(), s.y(), x, h, DEFAULT_DET_FLOOR))
}

/// Naive estimates over `x_grid` as a single-column profile at λ = 0.
/// Only `cfg.bandwidth` and `cfg.det_floor` are used.
pub fn naive_profile(s: &ObservedSample, x_grid: &[f64], cfg: &SmootherConfig) -> Result<LambdaProfile> {
    check_bandwidth(cfg.bandwidth)?;
    if !(cfg.det_floor > 0.0) {
        return Err(domain(format!("det_floor must be positive, got {}", cfg.det_floor)));
    }
    check_grid(x_grid)?;
    let rows = naive_rows(s.z(), s.y(), x_grid, cfg.bandwidth, cfg.det_floor);
    Ok(LambdaProfile::from_rows(x_grid.to_vec(), vec![0.0], rows.into_iter().map(|f| vec![f]).collect(), Method::Naive))
}

pub(crate) fn naive_rows(z: &[f64], y: &[f64], x_grid: &[f64], h: f64, det_floor: f64) -> Vec<PointFit> {
    x_grid.par_iter().map(|&x| local_linear(z, y, x, h, det_floor)).collect()
}

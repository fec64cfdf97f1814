use rayon::prelude::*;

use super::types::{LambdaProfile, Method, ObservedSample, PointFit, SmootherConfig};
use super::{check_bandwidth, check_grid, min_sq_dist};
use crate::error::{domain, Result};

/// Kernel-weighted sums `A_j = n⁻¹ Σ (Zᵢ−x)ʲ φ(x; Zᵢ, v)` and
/// `B_l = n⁻¹ Σ Yᵢ (Zᵢ−x)ˡ φ(x; Zᵢ, v)` with `v = h² + λσ_u²`.
///
/// The stored values are the true sums divided by `exp(log_scale)`, so
/// `a[j] * log_scale.exp()` recovers `A_j`. The common factor cancels in the
/// local solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSums {
    pub a: [f64; 3],
    pub b: [f64; 2],
    pub log_scale: f64,
    /// `r = h² / (h² + λσ_u²)`.
    pub shrinkage: f64,
    /// `λσ_u²`.
    pub added_variance: f64,
}

impl LocalSums {
    /// `A_j` on its natural scale.
    pub fn a_value(&self, j: usize) -> f64 {
        self.a[j] * self.log_scale.exp()
    }

    /// `B_l` on its natural scale.
    pub fn b_value(&self, l: usize) -> f64 {
        self.b[l] * self.log_scale.exp()
    }

    /// The conditional-moment sums `(S̃₀, S̃₁, S̃₂, T̃₀, T̃₁)` on the stored scale.
    pub fn tilde(&self) -> [f64; 5] {
        let r = self.shrinkage;
        let [a0, a1, a2] = self.a;
        [a0, r * a1, r * r * a2 + self.added_variance * r * a0, self.b[0], r * self.b[1]]
    }

    /// Solves the local 2×2 system, falling back to `B₀/A₀` when the relative
    /// determinant drops below `det_floor`.
    pub fn solve(&self, det_floor: f64) -> PointFit {
        let [s0, s1, s2, t0, t1] = self.tilde();
        let det = s0 * s2 - s1 * s1;
        if !(det > det_floor * s0 * s2) || !det.is_finite() {
            return PointFit { g_hat: t0 / s0, g_prime_hat: 0.0, degenerate: true };
        }
        PointFit { g_hat: (s2 * t0 - s1 * t1) / det, g_prime_hat: (s0 * t1 - s1 * t0) / det, degenerate: false }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(domain(format!("lambda must be nonnegative and finite, got {lambda}")));
    }
    Ok(())
}

/// Weighted sums at `x` for the EX criterion with added variance `λσ_u²`.
pub fn ex_local_sums(s: &ObservedSample, x: f64, lambda: f64, h: f64) -> Result<LocalSums> {
    check_bandwidth(h)?;
    check_lambda(lambda)?;
    if !x.is_finite() {
        return Err(domain(format!("evaluation point must be finite, got {x}")));
    }
    Ok(local_sums_unchecked(s.z(), s.y(), x, lambda * s.sigma_u2(), h))
}

pub(crate) fn local_sums_unchecked(z: &[f64], y: &[f64], x: f64, added_variance: f64, h: f64) -> LocalSums {
    let h2 = h * h;
    let v = h2 + added_variance;
    let d2_min = min_sq_dist(z, x);
    let inv_2v = 0.5 / v;
    let mut a = [0.0; 3];
    let mut b = [0.0; 2];
    for (&zi, &yi) in z.iter().zip(y) {
        let d = zi - x;
        let w = (-(d * d - d2_min) * inv_2v).exp();
        let wd = w * d;
        a[0] += w;
        a[1] += wd;
        a[2] += wd * d;
        b[0] += yi * w;
        b[1] += yi * wd;
    }
    let n = z.len() as f64;
    for v in a.iter_mut().chain(b.iter_mut()) {
        *v /= n;
    }
    LocalSums {
        a,
        b,
        log_scale: -d2_min * inv_2v - 0.5 * (2.0 * std::f64::consts::PI * v).ln(),
        shrinkage: h2 / v,
        added_variance,
    }
}

/// EX local-linear estimate of `g(x)` and `g′(x)` at one λ.
pub fn ex_fit_point(s: &ObservedSample, x: f64, lambda: f64, h: f64, det_floor: f64) -> Result<PointFit> {
    if !(det_floor > 0.0) {
        return Err(domain(format!("det_floor must be positive, got {det_floor}")));
    }
    Ok(ex_local_sums(s, x, lambda, h)?.solve(det_floor))
}

/// EX estimates over `x_grid × cfg.lambda_grid`. Deterministic.
pub fn ex_profile(s: &ObservedSample, x_grid: &[f64], cfg: &SmootherConfig) -> Result<LambdaProfile> {
    cfg.validate()?;
    check_grid(x_grid)?;
    let rows: Vec<Vec<PointFit>> = x_grid
        .par_iter()
        .map(|&x| {
            cfg.lambda_grid
                .iter()
                .map(|&lam| {
                    local_sums_unchecked(s.z(), s.y(), x, lam * s.sigma_u2(), cfg.bandwidth).solve(cfg.det_floor)
                })
                .collect()
        })
        .collect();
    Ok(LambdaProfile::from_rows(x_grid.to_vec(), cfg.lambda_grid.clone(), rows, Method::Ex))
}

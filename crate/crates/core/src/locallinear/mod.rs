//! Local-linear estimators: naive, simulation-free EX and classical SIMEX.
//!
//! All three solve a 2×2 weighted least-squares system per evaluation point
//! with Gaussian kernel weights. Weights are computed relative to the largest
//! weight at that point (`exp(-(d² - d²_min)/2v)`), which leaves the solution
//! unchanged and keeps the sums away from underflow for tiny bandwidths.

mod ex;
mod naive;
mod simex;
mod types;

pub use ex::{ex_fit_point, ex_local_sums, ex_profile, LocalSums};
pub use naive::{naive_fit, naive_profile};
pub use simex::{pseudo_data, simex_profile};
pub use types::{
    default_bandwidth, LambdaProfile, Method, ObservedSample, PointFit, SmootherConfig, DEFAULT_DET_FLOOR,
};

use crate::error::{domain, Result};

pub(crate) fn check_bandwidth(h: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(domain(format!("bandwidth must be positive and finite, got {h}")));
    }
    Ok(())
}

pub(crate) fn check_grid(x_grid: &[f64]) -> Result<()> {
    if x_grid.is_empty() {
        return Err(domain("x grid is empty"));
    }
    if let Some(x) = x_grid.iter().find(|x| !x.is_finite()) {
        return Err(domain(format!("x grid contains non-finite value {x}")));
    }
    Ok(())
}

/// Smallest squared distance from `x` to any entry of `z`.
#[inline]
pub(crate) fn min_sq_dist(z: &[f64], x: f64) -> f64 {
    z.iter().map(|&zi| (zi - x) * (zi - x)).fold(f64::INFINITY, f64::min)
}

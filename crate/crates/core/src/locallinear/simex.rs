use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::naive::{local_linear, naive_rows};
use super::types::{LambdaProfile, Method, ObservedSample, PointFit, SmootherConfig};
use super::check_grid;
use crate::error::{domain, Result};
use crate::rng::{keyed_stream, tag};

/// Remeasured surrogates `zᵢ + √λ·vᵢ` with `vᵢ ~ N(0, σ_u²)`. When no noise
/// would be added the input is returned and `stream` is left untouched.
pub fn pseudo_data<R: Rng + ?Sized>(z: &[f64], lambda: f64, sigma_u2: f64, stream: &mut R) -> Result<Vec<f64>> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(domain(format!("lambda must be nonnegative and finite, got {lambda}")));
    }
    if !(sigma_u2 >= 0.0) || !sigma_u2.is_finite() {
        return Err(domain(format!("sigma_u2 must be nonnegative, got {sigma_u2}")));
    }
    if lambda == 0.0 || sigma_u2 == 0.0 {
        return Ok(z.to_vec());
    }
    let sd = (lambda * sigma_u2).sqrt();
    Ok(z.iter().map(|&zi| zi + sd * stream.sample::<f64, _>(StandardNormal)).collect())
}

/// Classical SIMEX estimates over `x_grid × cfg.lambda_grid`, averaging
/// `cfg.simex_replicates` naive fits per λ > 0. Replicate `b` at λ-index `k`
/// draws from the stream keyed by `(cfg.seed, k, b)`, and replicate averages
/// are summed in index order, so the output does not depend on thread count.
pub fn simex_profile(s: &ObservedSample, x_grid: &[f64], cfg: &SmootherConfig) -> Result<LambdaProfile> {
    cfg.validate()?;
    check_grid(x_grid)?;
    let (z, y) = (s.z(), s.y());
    let (h, floor) = (cfg.bandwidth, cfg.det_floor);
    let n_rep = cfg.simex_replicates;
    let n_lam = cfg.lambda_grid.len();
    let n_x = x_grid.len();

    let tasks: Vec<(usize, usize)> = (0..n_lam)
        .filter(|&k| cfg.lambda_grid[k] > 0.0)
        .flat_map(|k| (0..n_rep).map(move |b| (k, b)))
        .collect();
    let replicate_fits: Vec<Vec<PointFit>> = tasks
        .par_iter()
        .map(|&(k, b)| {
            let mut stream = keyed_stream(cfg.seed, &[tag::SIMEX, k as u64, b as u64]);
            let zb = pseudo_data(z, cfg.lambda_grid[k], s.sigma_u2(), &mut stream)?;
            Ok(x_grid.iter().map(|&x| local_linear(&zb, y, x, h, floor)).collect())
        })
        .collect::<Result<_>>()?;

    let mut g_hat = vec![0.0; n_x * n_lam];
    let mut g_prime_hat = vec![0.0; n_x * n_lam];
    let mut degenerate = vec![0u32; n_x * n_lam];
    let mut fits_per_cell = vec![1u32; n_lam];

    let mut task = 0;
    for k in 0..n_lam {
        if cfg.lambda_grid[k] == 0.0 {
            for (j, fit) in naive_rows(z, y, x_grid, h, floor).into_iter().enumerate() {
                let c = j * n_lam + k;
                g_hat[c] = fit.g_hat;
                g_prime_hat[c] = fit.g_prime_hat;
                degenerate[c] = u32::from(fit.degenerate);
            }
            continue;
        }
        fits_per_cell[k] = n_rep as u32;
        for fits in &replicate_fits[task..task + n_rep] {
            for (j, fit) in fits.iter().enumerate() {
                let c = j * n_lam + k;
                g_hat[c] += fit.g_hat;
                g_prime_hat[c] += fit.g_prime_hat;
                degenerate[c] += u32::from(fit.degenerate);
            }
        }
        task += n_rep;
        for j in 0..n_x {
            let c = j * n_lam + k;
            g_hat[c] /= n_rep as f64;
            g_prime_hat[c] /= n_rep as f64;
        }
    }

    Ok(LambdaProfile {
        x_grid: x_grid.to_vec(),
        lambda_grid: cfg.lambda_grid.clone(),
        g_hat,
        g_prime_hat,
        degenerate,
        fits_per_cell,
        method: Method::Simex,
    })
}

//! Nonparametric regression with Gaussian covariate measurement error.
//!
//! The crate implements three local-linear estimators of `g` in the model
//! `Y = g(X) + ε`, `Z = X + U`, `U ~ N(0, σ_u²)`:
//!
//! * the naive smoother that treats `Z` as if it were `X`,
//! * classical SIMEX, which remeasures `Z` with extra simulated noise of
//!   variance `λσ_u²`, averages `B` replicate fits and extrapolates to `λ = -1`,
//! * the simulation-free EX estimator, which takes the conditional expectation
//!   of the kernel-weighted least-squares criterion in closed form (Gaussian
//!   kernel) and then extrapolates the same way.
//!
//! Supporting modules cover extrapolant fitting ([`extrapolation`]),
//! replicate-measurement ingestion ([`errormodel`]), quadrature-based
//! asymptotic diagnostics ([`asymptotics`]) and a seeded Monte-Carlo
//! benchmark harness ([`harness`]).

pub mod asymptotics;
pub mod errormodel;
mod error;
pub mod extrapolation;
pub mod gausskit;
pub mod harness;
pub mod io;
pub mod locallinear;
pub mod rng;

pub use error::{Error, Result};

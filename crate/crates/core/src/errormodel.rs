//! Replicate surrogate measurements and response transforms.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::locallinear::ObservedSample;

/// Responses with two independent surrogate measurements per subject.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSample {
    pub y: Vec<f64>,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

impl ReplicateSample {
    pub fn new(y: Vec<f64>, w1: Vec<f64>, w2: Vec<f64>) -> Result<Self> {
        let r = Self { y, w1, w2 };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if self.w1.len() != n || self.w2.len() != n {
            return Err(Error::Data(format!(
                "column lengths differ: y={}, w1={}, w2={}",
                n,
                self.w1.len(),
                self.w2.len()
            )));
        }
        if n < 2 {
            return Err(domain(format!("need at least 2 subjects to estimate the error variance, got {n}")));
        }
        for i in 0..n {
            if !(self.y[i].is_finite() && self.w1[i].is_finite() && self.w2[i].is_finite()) {
                return Err(Error::Data(format!("non-finite value in row {i}")));
            }
        }
        Ok(())
    }
}

/// Averages the replicates into `z = (w1 + w2)/2` and estimates its error
/// variance as the sample variance (divisor n − 1) of `(w1 − w2)/2`.
///
/// Both half-sum and half-difference carry variance σ²/2 when the two
/// replicate errors are i.i.d. N(0, σ²), so the estimate applies to `z`
/// directly.
///
/// The resulting sample must still satisfy the smoother's minimum of three
/// observations; [`averaged_surrogate`] exposes the same computation for any
/// `n ≥ 2`.
pub fn collapse_replicates(r: &ReplicateSample) -> Result<ObservedSample> {
    let (z, sigma_u2) = averaged_surrogate(r)?;
    ObservedSample::new(r.y.clone(), z, sigma_u2)
}

/// `(z, σ̂_u²)` as computed by [`collapse_replicates`].
pub fn averaged_surrogate(r: &ReplicateSample) -> Result<(Vec<f64>, f64)> {
    r.validate()?;
    let n = r.y.len() as f64;
    let half_diff: Vec<f64> = r.w1.iter().zip(&r.w2).map(|(a, b)| (a - b) / 2.0).collect();
    let mean = half_diff.iter().sum::<f64>() / n;
    let sigma_u2 = half_diff.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let z = r.w1.iter().zip(&r.w2).map(|(a, b)| (a + b) / 2.0).collect();
    Ok((z, sigma_u2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    None,
    Sqrt,
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Transform::None),
            "sqrt" => Ok(Transform::Sqrt),
            other => Err(domain(format!("unknown transform '{other}' (expected sqrt or none)"))),
        }
    }
}

pub fn transform_response(y: &[f64], kind: Transform) -> Result<Vec<f64>> {
    match kind {
        Transform::None => Ok(y.to_vec()),
        Transform::Sqrt => y
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if v >= 0.0 {
                    Ok(v.sqrt())
                } else {
                    Err(domain(format!("sqrt transform: row {i} has negative response {v}")))
                }
            })
            .collect(),
    }
}

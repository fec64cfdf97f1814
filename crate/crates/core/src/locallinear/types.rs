use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Relative determinant floor for the local 2×2 systems.
pub const DEFAULT_DET_FLOOR: f64 = 1e-12;

/// `h = n^(-1/5)`.
pub fn default_bandwidth(n: usize) -> f64 {
    (n as f64).powf(-0.2)
}

/// Responses `Y` and error-prone surrogates `Z = X + U` with known `Var(U)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSample {
    y: Vec<f64>,
    z: Vec<f64>,
    sigma_u2: f64,
}

impl ObservedSample {
    pub fn new(y: Vec<f64>, z: Vec<f64>, sigma_u2: f64) -> Result<Self> {
        if y.len() != z.len() {
            return Err(Error::Data(format!("y has {} entries but z has {}", y.len(), z.len())));
        }
        if y.len() < 3 {
            return Err(Error::Data(format!("need at least 3 observations, got {}", y.len())));
        }
        if let Some(i) = y.iter().zip(&z).position(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::Data(format!("non-finite value in row {i}")));
        }
        if !(sigma_u2 >= 0.0) || !sigma_u2.is_finite() {
            return Err(domain(format!("sigma_u2 must be nonnegative, got {sigma_u2}")));
        }
        Ok(Self { y, z, sigma_u2 })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn sigma_u2(&self) -> f64 {
        self.sigma_u2
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Bandwidth, λ grid and SIMEX settings shared by the profile builders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmootherConfig {
    pub bandwidth: f64,
    pub lambda_grid: Vec<f64>,
    pub det_floor: f64,
    pub simex_replicates: usize,
    pub seed: u64,
}

impl SmootherConfig {
    /// Defaults for a sample of size `n`: `h = n^(-1/5)`, λ = 0, 0.2, ..., 2, B = 50.
    pub fn for_sample_size(n: usize) -> Self {
        Self {
            bandwidth: default_bandwidth(n),
            lambda_grid: (0..=10).map(|k| k as f64 * 0.2).collect(),
            det_floor: DEFAULT_DET_FLOOR,
            simex_replicates: 50,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        super::check_bandwidth(self.bandwidth)?;
        let grid = &self.lambda_grid;
        if grid.is_empty() {
            return Err(domain("lambda grid is empty"));
        }
        if !(grid[0] >= 0.0) {
            return Err(domain(format!("lambda grid must start at a nonnegative value, got {}", grid[0])));
        }
        if grid.iter().any(|l| !l.is_finite()) || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain("lambda grid must be finite and strictly ascending"));
        }
        if !(self.det_floor > 0.0) {
            return Err(domain(format!("det_floor must be positive, got {}", self.det_floor)));
        }
        if self.simex_replicates == 0 {
            return Err(domain("simex_replicates must be at least 1"));
        }
        Ok(())
    }
}

/// Local-linear solution at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointFit {
    pub g_hat: f64,
    pub g_prime_hat: f64,
    /// The determinant guard fired and `g_hat` is the locally-constant fallback.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ex,
    Simex,
    Naive,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Ex => "EX",
            Method::Simex => "SIMEX",
            Method::Naive => "Naive",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ex" => Ok(Method::Ex),
            "simex" => Ok(Method::Simex),
            "naive" => Ok(Method::Naive),
            other => Err(domain(format!("unknown method '{other}' (expected ex, simex or naive)"))),
        }
    }
}

/// Estimates over an x-grid × λ-grid, stored row-major by x.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaProfile {
    pub x_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub g_hat: Vec<f64>,
    pub g_prime_hat: Vec<f64>,
    /// Number of degenerate local fits that went into each cell.
    pub degenerate: Vec<u32>,
    /// Number of local fits averaged into each cell of a λ column.
    pub fits_per_cell: Vec<u32>,
    pub method: Method,
}

impl LambdaProfile {
    pub(crate) fn from_rows(
        x_grid: Vec<f64>,
        lambda_grid: Vec<f64>,
        rows: Vec<Vec<PointFit>>,
        method: Method,
    ) -> Self {
        let k = lambda_grid.len();
        let mut g_hat = Vec::with_capacity(rows.len() * k);
        let mut g_prime_hat = Vec::with_capacity(rows.len() * k);
        let mut degenerate = Vec::with_capacity(rows.len() * k);
        for row in rows {
            debug_assert_eq!(row.len(), k);
            for fit in row {
                g_hat.push(fit.g_hat);
                g_prime_hat.push(fit.g_prime_hat);
                degenerate.push(u32::from(fit.degenerate));
            }
        }
        Self { x_grid, lambda_grid, g_hat, g_prime_hat, degenerate, fits_per_cell: vec![1; k], method }
    }

    pub fn n_x(&self) -> usize {
        self.x_grid.len()
    }

    pub fn n_lambda(&self) -> usize {
        self.lambda_grid.len()
    }

    pub fn g(&self, j: usize, k: usize) -> f64 {
        self.g_hat[j * self.n_lambda() + k]
    }

    pub fn g_prime(&self, j: usize, k: usize) -> f64 {
        self.g_prime_hat[j * self.n_lambda() + k]
    }

    /// Estimates at x-grid point `j` across the λ grid.
    pub fn row(&self, j: usize) -> &[f64] {
        let k = self.n_lambda();
        &self.g_hat[j * k..(j + 1) * k]
    }

    pub fn derivative_row(&self, j: usize) -> &[f64] {
        let k = self.n_lambda();
        &self.g_prime_hat[j * k..(j + 1) * k]
    }

    /// Column `k` of `g_hat` over the x grid.
    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.n_x()).map(|j| self.g(j, k)).collect()
    }

    /// A cell is usable for extrapolation unless every fit in it fell back.
    pub fn cell_usable(&self, j: usize, k: usize) -> bool {
        self.degenerate[j * self.n_lambda() + k] < self.fits_per_cell[k]
    }

    pub fn degenerate_count(&self) -> u64 {
        self.degenerate.iter().map(|&d| u64::from(d)).sum()
    }
}

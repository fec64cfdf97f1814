//! One-dimensional quadrature on finite intervals.

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadratureRule {
    /// Globally adaptive Gauss–Kronrod (7/15 points), bisecting the interval
    /// with the largest error estimate.
    Adaptive,
    /// A single Gauss–Legendre rule with the given number of nodes.
    FixedNodes(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub rule: QuadratureRule,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { rule: QuadratureRule::Adaptive, abs_tol: 1e-10, rel_tol: 1e-9, max_subdivisions: 4000 }
    }
}

impl QuadratureConfig {
    pub fn fixed(nodes: usize) -> Self {
        Self { rule: QuadratureRule::FixedNodes(nodes), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(domain("quadrature tolerances must be positive"));
        }
        if let QuadratureRule::FixedNodes(0) = self.rule {
            return Err(domain("fixed-node rule needs at least one node"));
        }
        if self.max_subdivisions == 0 {
            return Err(domain("max_subdivisions must be at least 1"));
        }
        Ok(())
    }
}

// Kronrod abscissae (descending, last is the centre) and weights; the Gauss
// 7-point rule uses every other abscissa starting at index 1.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// `(kronrod, |kronrod − gauss|)` on `[a, b]`.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let dx = hw * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * hw, ((k - g) * hw).abs())
}

/// Integrates `f` over `[a, b]` (finite, `a ≤ b`), starting the adaptive rule
/// from `pieces` equal subintervals.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize, q: &QuadratureConfig) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(domain(format!("integration limits must be finite, got [{a}, {b}]")));
    }
    if b <= a {
        return Ok(0.0);
    }
    match q.rule {
        QuadratureRule::FixedNodes(n) => {
            let (nodes, weights) = gauss_legendre(n);
            let (c, hw) = (0.5 * (a + b), 0.5 * (b - a));
            Ok(hw * nodes.iter().zip(&weights).map(|(x, w)| w * f(c + hw * x)).sum::<f64>())
        }
        QuadratureRule::Adaptive => adaptive(&f, a, b, pieces.max(1), q),
    }
}

fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize, q: &QuadratureConfig) -> Result<f64> {
    // (lo, hi, value, error)
    let mut parts: Vec<(f64, f64, f64, f64)> = (0..pieces)
        .map(|i| {
            let lo = a + (b - a) * i as f64 / pieces as f64;
            let hi = if i + 1 == pieces { b } else { a + (b - a) * (i + 1) as f64 / pieces as f64 };
            let (v, e) = gk15(f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    let mut splits = 0;
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        let target = q.abs_tol.max(q.rel_tol * total.abs());
        if !total.is_finite() {
            return Err(Error::Consistency(format!("non-finite integrand on [{a}, {b}]")));
        }
        if err <= target {
            return Ok(total);
        }
        if splits >= q.max_subdivisions {
            return Err(Error::Quadrature { achieved: err, requested: target });
        }
        let worst = (0..parts.len()).max_by(|&i, &j| parts[i].3.total_cmp(&parts[j].3)).unwrap_or(0);
        let (lo, hi, _, _) = parts[worst];
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            return Err(Error::Quadrature { achieved: err, requested: target });
        }
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        parts[worst] = (lo, mid, v1, e1);
        parts.push((mid, hi, v2, e2));
        splits += 1;
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

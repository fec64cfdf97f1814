use std::sync::Arc;

use proptest::prelude::*;

use super::*;

fn q() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn tight() -> QuadratureConfig {
    QuadratureConfig { abs_tol: 1e-13, rel_tol: 1e-12, ..QuadratureConfig::default() }
}

fn builtin(t: BuiltinTruth, su2: f64) -> TrueModel {
    TrueModel::builtin(t, 1.0, su2).unwrap()
}

fn linear(a: f64, b: f64, sx2: f64, su2: f64) -> TrueModel {
    TrueModel::gaussian_covariate(Arc::new(move |t| a + b * t), Some(Arc::new(|_| 0.0)), sx2, 1.0, su2).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

const ALL: [BuiltinTruth; 3] = [BuiltinTruth::Quadratic, BuiltinTruth::Exp, BuiltinTruth::XSinX];

#[test]
fn model_validation() {
    let f = |c: f64| -> RealFn { Arc::new(move |t| c * pdf_unchecked(t, 0.0, 1.0)) };
    let one: RealFn = Arc::new(|_| 1.0);
    assert!(TrueModel::new(one.clone(), None, f(1.0), one.clone(), 0.25, (f64::NEG_INFINITY, f64::INFINITY)).is_ok());
    assert!(TrueModel::new(one.clone(), None, f(1.01), one.clone(), 0.25, (f64::NEG_INFINITY, f64::INFINITY)).is_err());
    assert!(TrueModel::new(one.clone(), None, f(1.0), Arc::new(|t| t), 0.25, (f64::NEG_INFINITY, f64::INFINITY)).is_err());
    assert!(TrueModel::new(one.clone(), None, f(1.0), one.clone(), -0.1, (f64::NEG_INFINITY, f64::INFINITY)).is_err());
    // Uniform on [0, 2].
    let uni = TrueModel::new(one.clone(), None, Arc::new(|t| if (0.0..=2.0).contains(&t) { 0.5 } else { 0.0 }), one, 0.1, (0.0, 2.0));
    assert!(uni.is_ok());
    assert_eq!("xsinx".parse::<BuiltinTruth>().unwrap(), BuiltinTruth::XSinX);
    assert_eq!("square".parse::<BuiltinTruth>().unwrap(), BuiltinTruth::Quadratic);
    assert!("cubic".parse::<BuiltinTruth>().is_err());
}

#[test]
fn moments_at_the_limit_collapse_pointwise() {
    let m = builtin(BuiltinTruth::XSinX, 0.25);
    for &x in &[-1.3, 0.0, 0.4] {
        let fx = pdf_unchecked(x, 0.0, 1.0);
        let gx = x * x.sin();
        assert_eq!(weighted_moment(&m, MomentKind::F, 0, x, -1.0, &q()).unwrap(), fx);
        assert_eq!(weighted_moment(&m, MomentKind::F, 2, x, -1.0, &q()).unwrap(), x * x * fx);
        assert_eq!(weighted_moment(&m, MomentKind::GFun, 1, x, -1.0, &q()).unwrap(), x * gx * fx);
        assert_eq!(weighted_moment(&m, MomentKind::G2, 0, x, -1.0, &q()).unwrap(), gx * gx * fx);
        assert_eq!(weighted_moment(&m, MomentKind::Tau2, 0, x, -1.0, &q()).unwrap(), fx);
        assert_eq!(gamma_limit(&m, x, -1.0, &q()).unwrap(), gx);
    }
    assert!(weighted_moment(&m, MomentKind::F, 0, 0.0, -1.5, &q()).is_err());
    assert!(weighted_moment_derivative(&m, MomentKind::F, 0, 2, 0.0, -1.0, &q()).is_err());
}

#[test]
fn gaussian_convolution_closed_forms() {
    let sx2 = 1.7;
    let m = linear(0.0, 1.0, sx2, 0.3);
    for &x in &[-2.5, -0.4, 0.0, 1.1, 3.0] {
        for &lam in &[-0.5, 0.0, 0.6, 2.0] {
            let v = (lam + 1.0) * 0.3;
            let closed_f = pdf_unchecked(x, 0.0, v + sx2);
            let f = weighted_moment(&m, MomentKind::F, 0, x, lam, &q()).unwrap();
            assert!((f - closed_f).abs() < 1e-10, "x={x} lam={lam}");
            let closed_g = x * sx2 / (v + sx2) * closed_f;
            let g = weighted_moment(&m, MomentKind::GFun, 0, x, lam, &q()).unwrap();
            assert!((g - closed_g).abs() < 1e-10);
            // f₁ is the same integral as g₀ for g(t) = t.
            let f1 = weighted_moment(&m, MomentKind::F, 1, x, lam, &tight()).unwrap();
            assert!((f1 - closed_g).abs() < 1e-12);
        }
    }
}

#[test]
fn hermite_derivatives_match_closed_form() {
    // f₀(x) = φ(x; 0, s) so f₀″ = φ·(x²/s² − 1/s).
    let m = linear(0.0, 1.0, 1.0, 0.25);
    for &x in &[-1.5, 0.0, 0.8] {
        let s = 1.5 * 0.25 + 1.0;
        let closed = pdf_unchecked(x, 0.0, s) * (x * x / (s * s) - 1.0 / s);
        let d2 = weighted_moment_derivative(&m, MomentKind::F, 0, 2, x, 0.5, &tight()).unwrap();
        assert!((d2 - closed).abs() < 1e-11, "{d2} vs {closed}");
        let d1 = weighted_moment_derivative(&m, MomentKind::F, 0, 1, x, 0.5, &tight()).unwrap();
        assert!((d1 + x / s * pdf_unchecked(x, 0.0, s)).abs() < 1e-12);
    }
}

#[test]
fn gamma_values() {
    let m = linear(0.5, 2.0, 1.0, 0.25);
    for &x in &[-2.0, 0.3, 1.0] {
        for &lam in &[0.0, 0.5, 1.0, 2.0] {
            let want = 0.5 + 2.0 * x / ((lam + 1.0) * 0.25 + 1.0);
            assert!((gamma_limit(&m, x, lam, &q()).unwrap() - want).abs() < 1e-8);
        }
    }
    let sq = builtin(BuiltinTruth::Quadratic, 0.25);
    let v = gamma_limit(&sq, 1.0, 1.0, &tight()).unwrap();
    assert!(rel(v, 0.7777777777777777777777778) < 1e-11, "{v}");
    assert!(gamma_limit(&sq, 40.0, 1.0, &q()).is_err());
}

#[test]
fn gamma_moves_toward_truth_as_lambda_decreases() {
    let path = [1.0, 0.5, 0.0, -0.5, -0.9, -0.99];
    let mut deviations = Vec::new();
    for t in ALL {
        let m = builtin(t, 0.25);
        for &x in &[-1.0, 0.0, 1.0] {
            let gx = t.g(x);
            let gaps: Vec<f64> = path.iter().map(|&l| (gamma_limit(&m, x, l, &q()).unwrap() - gx).abs()).collect();
            for w in gaps.windows(2) {
                if w[1] > w[0] + 1e-9 {
                    deviations.push(format!("{t} x={x}: {:?}", gaps));
                    break;
                }
            }
            assert!(gaps[5] < 0.05, "{t} x={x} {:?}", gaps);
        }
    }
    // Non-monotone paths are reported, not failed.
    for d in &deviations {
        eprintln!("non-monotone Γ path: {d}");
    }
}

#[test]
fn bias_values() {
    let c = TrueModel::builtin(BuiltinTruth::Quadratic, 1.0, 0.25).unwrap();
    let constant = TrueModel { g: Arc::new(|_| 3.0), g_second: Some(Arc::new(|_| 0.0)), ..c.clone() };
    for &x in &[-1.0, 0.2, 1.5] {
        assert!(bias_coefficient(&constant, x, 0.7, &q()).unwrap().abs() < 1e-8);
    }
    let b = bias_coefficient(&c, 0.7, 0.5, &tight()).unwrap();
    assert!(rel(b, 0.5289256198347107438016529) < 1e-9, "{b}");
    let near = bias_coefficient(&c, 0.7, -1.0 + 1e-4, &tight()).unwrap();
    assert!(rel(near, 1.0) < 1e-2, "{near}");
    assert_eq!(bias_coefficient(&c, 0.7, -1.0, &q()).unwrap(), 1.0);
}

#[test]
fn bias_converges_linearly_near_minus_one() {
    for t in ALL {
        let m = builtin(t, 0.25);
        for &x in &[-1.0, 0.0, 1.0] {
            let target = 0.5 * t.g_second(x);
            let err = |d: f64| (bias_coefficient(&m, x, -1.0 + d, &tight()).unwrap() - target).abs();
            let (e1, e2) = (err(1e-2), err(1e-3));
            assert!(e2 < 1e-2 * (1.0 + target.abs()), "{t} x={x}: {e2}");
            // Error ratio across a decade is about 10 for an O(δ) rate.
            if e1 > 1e-9 {
                let ratio = e1 / e2;
                assert!((5.0..20.0).contains(&ratio), "{t} x={x}: ratio {ratio}");
            }
        }
    }
}

#[test]
fn variance_values() {
    let m = builtin(BuiltinTruth::XSinX, 0.25);
    let v = variance_delta(&m, 0.0, 1.0, &tight()).unwrap();
    assert!(rel(v, 1.969851534939424775130384) < 1e-9, "{v}");

    // Error-free λ = 0 reduces to τ²/(2√π f_X).
    let clean = TrueModel::builtin(BuiltinTruth::Exp, 0.6, 0.0).unwrap();
    for &x in &[-1.0, 0.5] {
        let want = 0.6 / (2.0 * PI.sqrt() * pdf_unchecked(x, 0.0, 1.0));
        assert!(rel(variance_delta(&clean, x, 0.0, &q()).unwrap(), want) < 1e-12);
    }
    // g ≡ 0, constant τ²: σ²/(2√π f₀₀).
    let zero = TrueModel::gaussian_covariate(Arc::new(|_| 0.0), None, 1.0, 0.8, 0.25).unwrap();
    let f00 = pdf_unchecked(0.3, 0.0, 1.25);
    assert!(rel(variance_delta(&zero, 0.3, 0.0, &q()).unwrap(), 0.8 / (2.0 * PI.sqrt() * f00)) < 1e-8);
    assert!(variance_delta(&clean, 0.0, 1.0, &q()).is_err());
    assert!(variance_delta(&m, 0.0, -0.2, &q()).is_err());
}

#[test]
fn cross_covariance_values() {
    let m = builtin(BuiltinTruth::Exp, 0.1);
    let c = cross_covariance(&m, 0.0, &[0.5, 1.0], &tight()).unwrap();
    let want = [[3.8792810085126845353, 3.2497753562570093513], [3.2497753562570093513, 2.9003073870891275785]];
    for i in 0..2 {
        for j in 0..2 {
            assert!(rel(c[i][j], want[i][j]) < 1e-9, "{i}{j}: {}", c[i][j]);
        }
    }
    assert!(cross_covariance(&m, 0.0, &[1.0, 0.5], &q()).is_err());
    assert!(cross_covariance(&m, 0.0, &[0.0, 0.5], &q()).is_err());
}

#[test]
fn cross_covariance_is_consistent_with_pointwise_variance() {
    let lams = [0.2, 0.6, 1.0, 1.4, 2.0];
    for t in ALL {
        let m = builtin(t, 0.25);
        for &x in &[-1.0, 0.5] {
            let c = cross_covariance(&m, x, &lams, &tight()).unwrap();
            for i in 0..lams.len() {
                let v = variance_delta(&m, x, lams[i], &tight()).unwrap();
                assert!(rel(c[i][i], v) < 1e-8, "{t} x={x} λ={}", lams[i]);
                for j in 0..lams.len() {
                    assert_eq!(c[i][j], c[j][i]);
                }
            }
            // Positive semidefinite: Cholesky with a small jitter.
            let k = lams.len();
            let mut l = vec![vec![0.0; k]; k];
            for i in 0..k {
                for j in 0..=i {
                    let s: f64 = (0..j).map(|p| l[i][p] * l[j][p]).sum();
                    if i == j {
                        let d = c[i][i] * (1.0 + 1e-7) - s;
                        assert!(d > 0.0, "{t} x={x}: not PSD");
                        l[i][j] = d.sqrt();
                    } else {
                        l[i][j] = (c[i][j] - s) / l[j][j];
                    }
                }
            }
            let single = cross_covariance(&m, x, &[0.8], &tight()).unwrap();
            assert!(rel(single[0][0], variance_delta(&m, x, 0.8, &tight()).unwrap()) < 1e-8);
        }
    }
}

#[test]
fn fixed_node_rule_is_grid_independent() {
    let m = builtin(BuiltinTruth::XSinX, 0.25);
    let (a, b) = (QuadratureConfig::fixed(96), QuadratureConfig::fixed(192));
    for &x in &[-1.5, 0.0, 2.0] {
        for &lam in &[0.0, 1.0] {
            let fa = gamma_limit(&m, x, lam, &a).unwrap();
            let fb = gamma_limit(&m, x, lam, &b).unwrap();
            assert!((fa - fb).abs() < 1e-10);
            let adaptive = gamma_limit(&m, x, lam, &q()).unwrap();
            assert!((fa - adaptive).abs() < 1e-8);
            let va = variance_delta(&m, x, lam, &a).unwrap();
            let vb = variance_delta(&m, x, lam, &b).unwrap();
            assert!((va - vb).abs() < 1e-9 * (1.0 + vb.abs()));
            let ba = bias_coefficient(&m, x, lam, &a).unwrap();
            let bb = bias_coefficient(&m, x, lam, &b).unwrap();
            assert!((ba - bb).abs() < 1e-9 * (1.0 + bb.abs()));
        }
    }
}

#[test]
fn quadrature_failure_is_reported() {
    let m = builtin(BuiltinTruth::Exp, 0.25);
    let starved = QuadratureConfig { abs_tol: 1e-300, rel_tol: 1e-300, max_subdivisions: 2, ..q() };
    let err = weighted_moment(&m, MomentKind::G2, 3, 0.5, 1.0, &starved).unwrap_err();
    assert!(matches!(err, Error::Quadrature { .. }), "{err}");
}

#[test]
fn lemma_means_small_h() {
    let m = builtin(BuiltinTruth::Quadratic, 0.25);
    let f0 = weighted_moment(&m, MomentKind::F, 0, 0.4, 1.0, &tight()).unwrap();
    let p = lemma_moment_predictions(&m, 0.4, 1.0, 1e-3, 100, &tight()).unwrap();
    assert!((p.s[0].mean - f0).abs() < 1e-5);
    let mut last = f64::INFINITY;
    for h in [0.3, 0.1, 0.03, 0.01] {
        let p = lemma_moment_predictions(&m, 0.4, 1.0, h, 100, &tight()).unwrap();
        assert!(rel(p.s[2].mean / (h * h), f0) < 1e-12);
        // The finite-h expectation of S̃₂ approaches h²·f₀ from the exact means.
        let r = h * h / (h * h + 0.25);
        let exact_s2 = r * r * p.a_mean_exact[2] + 0.25 * r * p.a_mean_exact[0];
        let gap = (exact_s2 / (h * h) - f0).abs();
        assert!(gap < last, "h={h}: {gap}");
        last = gap;
        // Expansion and exact finite-h means agree to O(h⁴).
        for j in 0..3 {
            assert!((p.a_mean[j] - p.a_mean_exact[j]).abs() < 0.5 * h.powi(4) + 1e-12, "A{j} h={h}");
        }
        for l in 0..2 {
            assert!((p.b_mean[l] - p.b_mean_exact[l]).abs() < 2.0 * h.powi(4) + 1e-12, "B{l} h={h}");
        }
    }
    let z = lemma_moment_predictions(&m, 0.4, 0.0, 0.2, 100, &q()).unwrap();
    assert!(z.s.iter().chain(&z.t).all(|p| p.variance > 0.0));
    assert!(lemma_moment_predictions(&m, 0.4, 1.0, 0.0, 100, &q()).is_err());
}

#[test]
fn moment_coefficients_shape() {
    let m = builtin(BuiltinTruth::XSinX, 0.25);
    let c = moment_coefficients(&m, 0.3, 1.0, &q()).unwrap();
    assert!(c.d0 > 0.0);
    assert!((c.d0 - 1.0 / c.f_moms[0]).abs() < 1e-15);
    assert!((c.c0 + c.g_moms[0] / c.f_moms[0].powi(2)).abs() < 1e-15);
    assert!(moment_coefficients(&m, 0.3, -1.0, &q()).is_err());
}

#[test]
fn diagnose_grid_orders_rows() {
    let m = builtin(BuiltinTruth::Quadratic, 0.25);
    let rows = diagnose_grid(&m, &[-1.0, 0.0], &[0.0, 1.0], &q()).unwrap();
    let keys: Vec<(f64, f64)> = rows.iter().map(|r| (r.x, r.lambda)).collect();
    assert_eq!(keys, vec![(-1.0, 0.0), (-1.0, 1.0), (0.0, 0.0), (0.0, 1.0)]);
    assert!(rows.iter().all(|r| r.var_point >= 0.0 && r.cross.is_none()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn variance_is_nonnegative(x in -2.5..2.5f64, lam in 0.0..2.0f64, su2 in 0.05..0.6f64, which in 0usize..3) {
        let m = builtin(ALL[which], su2);
        let v = variance_delta(&m, x, lam, &q()).unwrap();
        prop_assert!(v >= -q().abs_tol);
    }
}

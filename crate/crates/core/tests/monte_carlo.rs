use exsmooth::asymptotics::{cross_covariance, variance_delta, BuiltinTruth, QuadratureConfig, TrueModel};
use exsmooth::harness::{generate_dataset, GName, SimulationSpec};
use exsmooth::locallinear::{default_bandwidth, ex_fit_point, DEFAULT_DET_FLOOR};

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
}

#[test]
fn empirical_covariance_across_lambdas() {
    let n = 2000;
    let model = TrueModel::builtin(BuiltinTruth::Exp, 1.0, 0.1).unwrap();
    let q = QuadratureConfig::default();
    let lambdas = [0.5, 1.0];
    let cov = cross_covariance(&model, 0.0, &lambdas, &q).unwrap();
    let spec = SimulationSpec { seed: 31, ..SimulationSpec::new(GName::Exp, n, 0.1) };
    let h = default_bandwidth(n);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for d in 0..500 {
        let s = generate_dataset(&spec, d).unwrap().sample;
        a.push(ex_fit_point(&s, 0.0, lambdas[0], h, DEFAULT_DET_FLOOR).unwrap().g_hat);
        b.push(ex_fit_point(&s, 0.0, lambdas[1], h, DEFAULT_DET_FLOOR).unwrap().g_hat);
    }
    let nf = n as f64;
    let off = nf * covariance(&a, &b);
    assert!((off / cov[0][1] - 1.0).abs() <= 0.30, "n*cov = {off}, predicted {}", cov[0][1]);
}

#[test]
fn empirical_variance_at_one_lambda() {
    let n = 2000;
    let model = TrueModel::builtin(BuiltinTruth::XSinX, 1.0, 0.25).unwrap();
    let delta = variance_delta(&model, 0.0, 1.0, &QuadratureConfig::default()).unwrap();
    let spec = SimulationSpec { seed: 32, ..SimulationSpec::new(GName::XSinX, n, 0.25) };
    let h = default_bandwidth(n);
    let est: Vec<f64> = (0..500)
        .map(|d| ex_fit_point(&generate_dataset(&spec, d).unwrap().sample, 0.0, 1.0, h, DEFAULT_DET_FLOOR).unwrap().g_hat)
        .collect();
    let emp = n as f64 * covariance(&est, &est);
    assert!((emp / delta - 1.0).abs() <= 0.25, "n*var = {emp}, predicted {delta}");
}

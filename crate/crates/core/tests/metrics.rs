use evolop_core::datasets::{simulate, SystemSpec};
use evolop_core::estimators::{build_pairs, fit, EstimatorConfig};
use evolop_core::kernels::KernelSpec;
use evolop_core::metrics::{forecast_rmse, vamp2_score, ModelForecaster};
use evolop_core::rng;
use evolop_core::spectral::ForecastMethod;
use evolop_core::Mat;

#[test]
fn vamp2_of_independent_features_is_small() {
    let n = 10_000;
    for seed in 0..20 {
        let mut r = rng::seeded(seed);
        let fx = Mat::from_fn(n, 2, |_, _| rng::normal(&mut r));
        let fy = Mat::from_fn(n, 2, |_, _| rng::normal(&mut r));
        let s = vamp2_score(fx.as_ref(), fy.as_ref(), 2, 0.0).unwrap();
        assert!((0.0..=0.05).contains(&s), "seed {seed}: {s}");
    }
}

#[test]
fn vamp2_lies_in_zero_to_rank() {
    let mut r = rng::seeded(3);
    let fx = Mat::from_fn(2000, 3, |_, _| rng::normal(&mut r));
    let fy = Mat::from_fn(2000, 3, |i, j| 0.8 * fx[(i, (j + 1) % 3)] + 0.6 * rng::normal(&mut r));
    for rank in 1..=3 {
        let s = vamp2_score(fx.as_ref(), fy.as_ref(), rank, 1e-8).unwrap();
        assert!(s >= 0.0 && s <= rank as f64 + 1e-9);
    }
}

fn contraction() -> SystemSpec {
    SystemSpec::LinearSystem { a: vec![vec![0.8, 0.3], vec![-0.2, 0.7]], noise_std: 0.0 }
}

fn damped_rotation() -> SystemSpec {
    let (c, s) = (0.99 * 0.3f64.cos(), 0.99 * 0.3f64.sin());
    SystemSpec::LinearSystem { a: vec![vec![c, -s], vec![s, c]], noise_std: 0.0 }
}

#[test]
fn perfect_linear_model_forecasts_exactly() {
    let spec = contraction();
    let train = simulate(&spec, &[1.0, -1.0], 30, 0).unwrap();
    let test = simulate(&spec, &[-0.5, 2.0], 20, 0).unwrap();
    let pairs = build_pairs(&train.values, 1).unwrap();
    let model = fit(&EstimatorConfig::ridge(1e-13), &KernelSpec::Linear, &pairs).unwrap();
    let f = pairs.y.to_mat();
    for method in [ForecastMethod::Rollout, ForecastMethod::Spectral] {
        let fc = ModelForecaster::new(&model, f.as_ref(), method).unwrap();
        let report = forecast_rmse(&fc, &test.values, None, &[1, 2, 5, 10]).unwrap();
        for (k, v) in &report.details {
            assert!(*v <= 1e-6, "{method:?} {k}: {v:e}");
        }
    }
}

#[test]
fn over_regularized_model_error_grows_with_horizon() {
    let spec = damped_rotation();
    let train = simulate(&spec, &[1.0, -1.0], 200, 0).unwrap();
    let test = simulate(&spec, &[2.0, 1.0], 40, 0).unwrap();
    let pairs = build_pairs(&train.values, 1).unwrap();
    let model = fit(&EstimatorConfig::ridge(0.02), &KernelSpec::Linear, &pairs).unwrap();
    let f = pairs.y.to_mat();
    let fc = ModelForecaster::new(&model, f.as_ref(), ForecastMethod::Rollout).unwrap();
    let horizons: Vec<usize> = (1..=10).collect();
    let report = forecast_rmse(&fc, &test.values, None, &horizons).unwrap();
    let errs: Vec<f64> = horizons.iter().map(|h| report.details[&format!("horizon_{h}")]).collect();
    assert!(errs.iter().all(|e| e.is_finite()));
    assert!(errs[0] > 1e-3);
    for w in errs.windows(2) {
        assert!(w[1] >= w[0], "{errs:?}");
    }
}

use evolop_core::datasets::{simulate, SystemSpec};
use evolop_core::estimators::{build_pairs, fit, EstimatorConfig, FittedOperator, SnapshotPair};
use evolop_core::kernels::{DataMatrix, KernelSpec};
use evolop_core::rng;
use evolop_core::spectral::{
    compute_modes, eig_decomposition, predict, EigenSide, ForecastMethod, SpectralDecomposition,
};
use evolop_core::{c64, Error, Mat};

fn linear_map_pairs(a: [[f64; 2]; 2], n: usize, seed: u64) -> SnapshotPair {
    let mut r = rng::seeded(seed);
    let x: Vec<[f64; 2]> = (0..n).map(|_| [rng::normal(&mut r), rng::normal(&mut r)]).collect();
    let y: Vec<[f64; 2]> = x
        .iter()
        .map(|p| [a[0][0] * p[0] + a[0][1] * p[1], a[1][0] * p[0] + a[1][1] * p[1]])
        .collect();
    SnapshotPair::new(DataMatrix::from_rows(&x).unwrap(), DataMatrix::from_rows(&y).unwrap(), 1).unwrap()
}

fn langevin_model(n: usize, config: EstimatorConfig) -> FittedOperator {
    let spec = SystemSpec::LangevinQuadWell { beta: 1.0, dt: 1e-4, stride: 100 };
    let traj = simulate(&spec, &[0.0], n + 1, 21).unwrap();
    let pairs = build_pairs(&traj.values, 1).unwrap();
    fit(&config, &KernelSpec::Gaussian { lengthscale: 0.2 }, &pairs).unwrap()
}

fn separated_ridge_model() -> FittedOperator {
    let mut r = rng::seeded(5);
    let n = 40;
    let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.5 + 0.1 * rng::uniform(&mut r)).collect();
    let y: Vec<f64> = x.iter().map(|v| 19.6 - v + 0.1 * rng::normal(&mut r)).collect();
    let pairs = SnapshotPair::new(DataMatrix::new(n, 1, x).unwrap(), DataMatrix::new(n, 1, y).unwrap(), 1).unwrap();
    fit(&EstimatorConfig::ridge(1e-3), &KernelSpec::Gaussian { lengthscale: 0.4 }, &pairs).unwrap()
}

fn column(m: &Mat<c64>, j: usize) -> Vec<c64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

fn check_invariants(d: &SpectralDecomposition<'_>) {
    let model = d.model();
    let l = d.eigenvalues();
    for w in l.windows(2) {
        assert!(w[0].norm() >= w[1].norm() - 1e-15);
    }
    for lam in l {
        if lam.im != 0.0 {
            assert!(l.iter().any(|m| *m == lam.conj()), "missing conjugate of {lam}");
        }
    }
    let psi = d.eval_eigenfunctions(model.x_train(), EigenSide::Right).unwrap();
    let n = model.n_samples() as f64;
    for j in 0..d.len() {
        let norm = column(&psi, j).iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
        assert!((norm - 1.0).abs() < 1e-8, "eigenfunction {j} norm {norm}");
        if l[j].im != 0.0 {
            let k = l.iter().position(|m| *m == l[j].conj()).unwrap();
            for i in 0..psi.nrows() {
                assert!((psi[(i, j)] - psi[(i, k)].conj()).norm() < 1e-10);
            }
        }
    }
}

#[test]
fn rotation_map_gives_conjugate_pair() {
    let theta: f64 = 0.1;
    let (c, s) = (theta.cos(), theta.sin());
    let pairs = linear_map_pairs([[c, -s], [s, c]], 50, 1);
    let model = fit(&EstimatorConfig::rrr(2, 1e-12), &KernelSpec::Linear, &pairs).unwrap();
    let d = eig_decomposition(&model).unwrap();
    assert_eq!(d.len(), 2);
    let expected = c64::new(c, s);
    assert!((d.eigenvalues()[0] - expected).norm() < 1e-6, "{:?}", d.eigenvalues());
    assert!((d.eigenvalues()[1] - expected.conj()).norm() < 1e-6);
    assert_eq!(d.eigenvalues()[0], d.eigenvalues()[1].conj());
    check_invariants(&d);
    let report = d.report();
    assert!((report.log_rate[0][1] - theta).abs() < 1e-6);
}

#[test]
fn invariants_hold_on_kernel_models() {
    for config in [EstimatorConfig::pcr(6, 1e-4), EstimatorConfig::rrr(6, 1e-4)] {
        let model = langevin_model(300, config);
        check_invariants(&eig_decomposition(&model).unwrap());
    }
    check_invariants(&eig_decomposition(&separated_ridge_model()).unwrap());
    let pairs = linear_map_pairs([[0.6, -0.7], [0.7, 0.6]], 200, 3);
    let model = fit(&EstimatorConfig::rrr(4, 1e-4), &KernelSpec::Gaussian { lengthscale: 1.5 }, &pairs).unwrap();
    let d = eig_decomposition(&model).unwrap();
    assert!(d.eigenvalues().iter().any(|l| l.im != 0.0));
    check_invariants(&d);
}

#[test]
fn eigenfunction_equation_on_noiseless_linear_data() {
    let pairs = linear_map_pairs([[0.9, 0.2], [0.0, 0.5]], 60, 4);
    let model = fit(&EstimatorConfig::rrr(2, 1e-12), &KernelSpec::Linear, &pairs).unwrap();
    let d = eig_decomposition(&model).unwrap();
    let px = d.eval_eigenfunctions(&pairs.x, EigenSide::Right).unwrap();
    let py = d.eval_eigenfunctions(&pairs.y, EigenSide::Right).unwrap();
    let n = pairs.len() as f64;
    for (j, lam) in d.eigenvalues().iter().enumerate() {
        let res: f64 = (0..pairs.len()).map(|i| (py[(i, j)] - lam * px[(i, j)]).norm_sqr()).sum::<f64>().sqrt() / n.sqrt();
        assert!(res < 1e-6, "eigenfunction {j}: residual {res:e}");
    }
}

#[test]
fn left_and_right_eigenfunctions_are_biorthonormal() {
    let model = langevin_model(300, EstimatorConfig::rrr(5, 1e-4));
    let d = eig_decomposition(&model).unwrap();
    let right_y = d.eval_eigenfunctions(model.y_train(), EigenSide::Right).unwrap();
    let gram = d.left_coeffs().transpose() * &right_y;
    for j in 0..d.len() {
        for k in 0..d.len() {
            let expected = if j == k { 1.0 } else { 0.0 };
            assert!((gram[(j, k)] - c64::new(expected, 0.0)).norm() < 1e-6, "({j},{k}) = {}", gram[(j, k)]);
        }
    }
}

#[test]
fn modes_of_zero_and_of_an_eigenfunction() {
    let model = langevin_model(300, EstimatorConfig::rrr(5, 1e-4));
    let d = eig_decomposition(&model).unwrap();
    let zero = compute_modes(&d, Mat::<f64>::zeros(model.n_samples(), 2).as_ref()).unwrap();
    assert!(zero.modes.col_iter().all(|c| c.iter().all(|v| *v == c64::new(0.0, 0.0))));

    assert!(d.eigenvalues().iter().all(|l| l.im == 0.0));
    let psi = d.eval_eigenfunctions(model.y_train(), EigenSide::Right).unwrap();
    let f = Mat::from_fn(model.n_samples(), 1, |i, _| psi[(i, 2)].re);
    let m = compute_modes(&d, f.as_ref()).unwrap();
    let peak = m.modes[(2, 0)].norm();
    assert!((peak - 1.0).abs() < 1e-6);
    for j in 0..d.len() {
        if j != 2 {
            assert!(m.modes[(j, 0)].norm() <= 1e-6 * peak, "mode {j}: {}", m.modes[(j, 0)]);
        }
    }
    assert!(compute_modes(&d, Mat::<f64>::zeros(3, 1).as_ref()).is_err());
}

#[test]
fn modes_reconstruct_full_rank_ridge() {
    let model = separated_ridge_model();
    let d = eig_decomposition(&model).unwrap();
    assert!(d.is_diagonalizable());
    assert_eq!(d.len(), model.n_samples());
    let f = Mat::from_fn(model.n_samples(), 2, |i, j| {
        let y = model.y_train().row(i)[0];
        if j == 0 { y.sin() } else { y * y / 100.0 }
    });
    let modes = compute_modes(&d, f.as_ref()).unwrap();

    // Σ_j ψ_j(y_l) m_j reproduces f on the training targets
    let py = d.eval_eigenfunctions(model.y_train(), EigenSide::Right).unwrap();
    let recon = &py * &modes.modes;
    // Σ_j λ_j ψ_j(x_i) m_j is the one-step prediction
    let one_step = d.evolve(&modes, model.x_train(), 1).unwrap();
    let direct = model.predict_one_step(model.x_train(), f.as_ref()).unwrap();
    for i in 0..model.n_samples() {
        for c in 0..2 {
            assert!((recon[(i, c)] - c64::new(f[(i, c)], 0.0)).norm() < 1e-6);
            assert!((one_step[(i, c)] - c64::new(direct[(i, c)], 0.0)).norm() < 1e-6);
        }
    }
}

#[test]
fn spectral_forecast_of_scalar_contraction() {
    let traj = DataMatrix::new(51, 1, (0..51).map(|i| 0.5f64.powi(i % 5) * (1.0 + i as f64 / 50.0)).collect()).unwrap();
    let x = traj.slice_rows(0, 50).unwrap();
    let y = DataMatrix::new(50, 1, x.as_slice().iter().map(|v| 0.5 * v).collect()).unwrap();
    let pairs = SnapshotPair::new(x, y, 1).unwrap();
    let model = fit(&EstimatorConfig::ridge(1e-10), &KernelSpec::Linear, &pairs).unwrap();
    let f = pairs.y.to_mat();
    let out = predict(&model, &[1.0], f.as_ref(), 3, ForecastMethod::Spectral).unwrap();
    for (k, expected) in [0.5, 0.25, 0.125].iter().enumerate() {
        assert!((out.values[(k, 0)] - expected).abs() < 1e-6);
    }
}

#[test]
fn spectral_and_rollout_match_matrix_powers() {
    let a = [[0.7, 0.3], [-0.2, 0.8]];
    let pairs = linear_map_pairs(a, 40, 8);
    let model = fit(&EstimatorConfig::ridge(1e-12), &KernelSpec::Linear, &pairs).unwrap();
    let f = pairs.y.to_mat();
    let x0 = [1.0, -0.5];
    let spectral = predict(&model, &x0, f.as_ref(), 5, ForecastMethod::Spectral).unwrap();
    let rollout = predict(&model, &x0, f.as_ref(), 5, ForecastMethod::Rollout).unwrap();
    let mut x = x0;
    for k in 0..5 {
        x = [a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]];
        for c in 0..2 {
            assert!((spectral.values[(k, c)] - x[c]).abs() < 1e-6);
            assert!((rollout.values[(k, c)] - x[c]).abs() < 1e-6);
            assert!((rollout.values[(k, c)] - spectral.values[(k, c)]).abs() < 1e-6);
        }
    }
    assert!(spectral.imag_residual < 1e-6);
}

#[test]
fn predict_rejects_bad_arguments() {
    let pairs = linear_map_pairs([[0.5, 0.0], [0.0, 0.5]], 20, 2);
    let model = fit(&EstimatorConfig::ridge(1e-6), &KernelSpec::Linear, &pairs).unwrap();
    let f = pairs.y.to_mat();
    assert!(predict(&model, &[1.0, 0.0], f.as_ref(), 0, ForecastMethod::Spectral).is_err());
    let scalar = Mat::from_fn(20, 1, |i, _| f[(i, 0)]);
    assert!(predict(&model, &[1.0, 0.0], scalar.as_ref(), 2, ForecastMethod::Rollout).is_err());
    assert!(predict(&model, &[1.0], f.as_ref(), 2, ForecastMethod::Rollout).is_err());
    let d = eig_decomposition(&model).unwrap();
    assert!(matches!(
        d.eval_eigenfunctions(&DataMatrix::new(1, 3, vec![0.0; 3]).unwrap(), EigenSide::Left),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn jordan_block_is_flagged() {
    let pairs = linear_map_pairs([[0.5, 1.0], [0.0, 0.5]], 40, 6);
    let model = fit(&EstimatorConfig::rrr(2, 1e-12), &KernelSpec::Linear, &pairs).unwrap();
    let d = eig_decomposition(&model).unwrap();
    assert!(!d.is_diagonalizable());
    let f = pairs.y.to_mat();
    assert!(matches!(compute_modes(&d, f.as_ref()), Err(Error::ModesUndefined)));
}

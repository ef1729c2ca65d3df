use evolop_core::estimators::{fit, fit_primal_oracle, EstimatorConfig, FeatureMap, SnapshotPair};
use evolop_core::kernels::{DataMatrix, KernelSpec};
use evolop_core::metrics::spectral_error_report;
use evolop_core::rng::{self, Pcg64};
use evolop_core::spectral::{eig_decomposition, EigenSide};
use evolop_core::{c64, Mat};

fn gaussian(rng: &mut Pcg64, n: usize, d: usize) -> Mat<f64> {
    Mat::from_fn(n, d, |_, _| rng::normal(rng))
}

/// Noisy linear dynamics `y = A x + ε` with random `A` of spectral radius below one.
fn linear_instance(seed: u64, n: usize, d: usize, noise: f64) -> SnapshotPair {
    let mut r = rng::seeded(seed);
    let x = gaussian(&mut r, n, d);
    let a = Mat::from_fn(d, d, |_, _| rng::normal(&mut r) * 0.5 / (d as f64).sqrt());
    let mut y = &x * a.transpose();
    for i in 0..n {
        for j in 0..d {
            y[(i, j)] += noise * rng::normal(&mut r);
        }
    }
    SnapshotPair::new(DataMatrix::from_mat(&x).unwrap(), DataMatrix::from_mat(&y).unwrap(), 1).unwrap()
}

fn max_abs(m: &Mat<f64>) -> f64 {
    let mut out: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].abs());
        }
    }
    out
}

fn rel_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    max_abs(&(a - b)) / max_abs(b).max(1e-300)
}

/// Largest deviation between two complex vectors after optimal phase alignment, relative to `b`.
fn phase_aligned_diff(a: &[c64], b: &[c64]) -> f64 {
    let mut inner = c64::new(0.0, 0.0);
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        inner += y.conj() * x;
        nb += y.norm_sqr();
    }
    let scale = inner / nb;
    let peak = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
    a.iter().zip(b).map(|(x, y)| (x - y * scale).norm()).fold(0.0, f64::max) / peak
}

/// Dual and primal agree on predictions, nonzero eigenvalues and eigenfunctions.
fn check_equivalence(pairs: &SnapshotPair, config: EstimatorConfig, features: &FeatureMap, probes: &DataMatrix) {
    let dual_pairs = SnapshotPair::new(
        DataMatrix::from_mat(&features.apply(&pairs.x)).unwrap(),
        DataMatrix::from_mat(&features.apply(&pairs.y)).unwrap(),
        1,
    )
    .unwrap();
    let dual_probes = DataMatrix::from_mat(&features.apply(probes)).unwrap();
    let model = fit(&config, &KernelSpec::Linear, &dual_pairs).unwrap();
    let primal = fit_primal_oracle(features, &config, pairs).unwrap();

    // identity observable on the feature coordinates
    let f_y = dual_pairs.y.to_mat();
    let df = f_y.ncols();
    let dual_pred = model.predict_one_step(&dual_probes, f_y.as_ref()).unwrap();
    let primal_pred = primal.predict(probes, Mat::<f64>::identity(df, df).as_ref());
    let d = rel_diff(&dual_pred, &primal_pred);
    assert!(d < 1e-8, "{config:?}: prediction mismatch {d:e}");

    let decomp = eig_decomposition(&model).unwrap();
    let spec = primal.spectrum().unwrap();
    let lead = spec.eigenvalues[0].norm();
    let nonzero: Vec<c64> = spec.eigenvalues.iter().copied().filter(|l| l.norm() > 1e-10 * lead).collect();
    assert_eq!(decomp.len(), nonzero.len(), "{config:?}: nonzero spectrum size");
    let report = spectral_error_report(decomp.eigenvalues(), &nonzero).unwrap();
    assert!(report.details["assignment_max"] < 1e-8 * lead, "{config:?}: eigenvalues {report:?}");

    let psi = decomp.eval_eigenfunctions(&dual_probes, EigenSide::Right).unwrap();
    let phi = features.apply(probes);
    for (j, lam) in decomp.eigenvalues().iter().enumerate() {
        let k = (0..spec.eigenvalues.len())
            .min_by(|&a, &b| (spec.eigenvalues[a] - lam).norm().total_cmp(&(spec.eigenvalues[b] - lam).norm()))
            .unwrap();
        let primal_vals: Vec<c64> = (0..probes.nrows())
            .map(|i| (0..df).map(|c| spec.vectors[(c, k)] * phi[(i, c)]).sum())
            .collect();
        let dual_vals: Vec<c64> = (0..probes.nrows()).map(|i| psi[(i, j)]).collect();
        let diff = phase_aligned_diff(&dual_vals, &primal_vals);
        assert!(diff < 1e-8, "{config:?}: eigenfunction {j} mismatch {diff:e}");
    }
}

#[test]
fn dual_matches_primal_on_random_linear_instances() {
    for seed in 0..20u64 {
        let mut r = rng::seeded(1000 + seed);
        let n = 20 + (rng::uniform(&mut r) * 80.0) as usize;
        let d = 1 + (rng::uniform(&mut r) * 4.0) as usize;
        let gamma = 10f64.powf(-4.0 + 3.0 * rng::uniform(&mut r));
        let pairs = linear_instance(seed, n, d, 0.1);
        let probes = DataMatrix::from_mat(&gaussian(&mut r, 15, d)).unwrap();
        let rank = 1 + seed as usize % d;
        for config in [EstimatorConfig::ridge(gamma), EstimatorConfig::pcr(rank, gamma), EstimatorConfig::rrr(rank, gamma)] {
            check_equivalence(&pairs, config, &FeatureMap::Identity, &probes);
        }
    }
}

#[test]
fn dual_matches_primal_with_random_fourier_features() {
    for seed in 0..5u64 {
        let pairs = linear_instance(50 + seed, 80, 2, 0.05);
        let features = FeatureMap::random_fourier(2, 6, 1.5, seed);
        let mut r = rng::seeded(seed);
        let probes = DataMatrix::from_mat(&gaussian(&mut r, 10, 2)).unwrap();
        for config in [EstimatorConfig::ridge(1e-3), EstimatorConfig::pcr(4, 1e-3), EstimatorConfig::rrr(3, 1e-3)] {
            check_equivalence(&pairs, config, &features, &probes);
        }
    }
}

#[test]
fn primal_ridge_on_exact_linear_map() {
    let x: Vec<f64> = (1..=20).map(|i| i as f64 / 10.0).collect();
    let y: Vec<f64> = x.iter().map(|v| 0.5 * v).collect();
    let pairs = SnapshotPair::new(DataMatrix::new(20, 1, x).unwrap(), DataMatrix::new(20, 1, y).unwrap(), 1).unwrap();
    let config = EstimatorConfig::ridge(0.0).with_pseudo_inverse();
    let g = fit_primal_oracle(&FeatureMap::Identity, &config, &pairs).unwrap().g;
    assert!((g[(0, 0)] - 0.5).abs() < 1e-15);
}

#[test]
fn primal_full_rank_rrr_is_ridge() {
    let pairs = linear_instance(9, 60, 3, 0.2);
    let ridge = fit_primal_oracle(&FeatureMap::Identity, &EstimatorConfig::ridge(0.0).with_pseudo_inverse(), &pairs)
        .unwrap()
        .g;
    let rrr = fit_primal_oracle(&FeatureMap::Identity, &EstimatorConfig::rrr(3, 0.0), &pairs).unwrap().g;
    assert!(rel_diff(&rrr, &ridge) < 1e-10);
}

// Cyclic Jacobi eigenvalue iteration for a symmetric matrix (row-major).
fn jacobi_eigh(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

// One-sided Jacobi SVD: returns (σ, U, V) with columns of U and V as vectors.
fn jacobi_svd(m: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let rows = m.len();
    let cols = m[0].len();
    let mut u: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| m[i][j]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..cols).map(|j| (0..cols).map(|i| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    for _ in 0..100 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = dot(&u[p], &u[p]);
                let beta = dot(&u[q], &u[q]);
                let gamma = dot(&u[p], &u[q]);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for col in [&mut u, &mut v] {
                    let (cp, cq) = (col[p].clone(), col[q].clone());
                    for k in 0..cp.len() {
                        col[p][k] = c * cp[k] - s * cq[k];
                        col[q][k] = s * cp[k] + c * cq[k];
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<f64> = u.iter().map(|c| dot(c, c).sqrt()).collect();
    for (c, s) in u.iter_mut().zip(&sigma) {
        c.iter_mut().for_each(|x| *x /= s);
    }
    (sigma, u, v)
}

#[test]
fn rank_one_rrr_matches_scratch_svd() {
    // rank-2 synthetic system in three dimensions
    let mut r = rng::seeded(77);
    let n = 400;
    let x = gaussian(&mut r, n, 3);
    let a = Mat::from_fn(3, 3, |i, j| [[0.8, 0.1, 0.0], [0.0, 0.4, 0.0], [0.0, 0.0, 0.0]][i][j]);
    let mut y = &x * a.transpose();
    for i in 0..n {
        for j in 0..3 {
            y[(i, j)] += 0.05 * rng::normal(&mut r);
        }
    }
    let pairs = SnapshotPair::new(DataMatrix::from_mat(&x).unwrap(), DataMatrix::from_mat(&y).unwrap(), 1).unwrap();
    let gamma = 1e-3;
    let g = fit_primal_oracle(&FeatureMap::Identity, &EstimatorConfig::rrr(1, gamma), &pairs).unwrap().g;

    let nf = n as f64;
    let cov = |p: &Mat<f64>, q: &Mat<f64>| -> Vec<Vec<f64>> {
        (0..3).map(|i| (0..3).map(|j| (0..n).map(|k| p[(k, i)] * q[(k, j)]).sum::<f64>() / nf).collect()).collect()
    };
    let mut cx = cov(&x, &x);
    for (i, row) in cx.iter_mut().enumerate() {
        row[i] += gamma;
    }
    let cxy = cov(&x, &y);
    let (vals, vecs) = jacobi_eigh(cx);
    let w: Vec<Vec<f64>> = (0..3)
        .map(|i| (0..3).map(|j| (0..3).map(|k| vecs[i][k] * vecs[j][k] / vals[k].sqrt()).sum()).collect())
        .collect();
    let mult = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        (0..3).map(|i| (0..3).map(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
    };
    let m = mult(&w, &cxy);
    let (sigma, u, v) = jacobi_svd(&m);
    let top = (0..3).max_by(|&a, &b| sigma[a].total_cmp(&sigma[b])).unwrap();
    let trunc: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| sigma[top] * u[top][i] * v[top][j]).collect()).collect();
    let expected = mult(&w, &trunc);
    for i in 0..3 {
        for j in 0..3 {
            assert!((g[(i, j)] - expected[i][j]).abs() < 1e-8, "({i},{j}): {} vs {}", g[(i, j)], expected[i][j]);
        }
    }
}

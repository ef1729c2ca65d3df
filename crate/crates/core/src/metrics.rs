//! Scores for learned operators: spectral and eigenfunction errors, VAMP-2,
//! forecast RMSE.

use std::collections::BTreeMap;

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::FittedOperator;
use crate::kernels::DataMatrix;
use crate::linalg::inverse_sqrt_psd;
use crate::spectral::{self, ForecastMethod, ModeSet, SpectralDecomposition};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub metric: String,
    pub value: f64,
    pub details: BTreeMap<String, f64>,
}

/// Symmetric Hausdorff distance between two finite sets of complex numbers.
pub fn spectral_error(estimated: &[c64], reference: &[c64]) -> Result<f64> {
    if estimated.is_empty() || reference.is_empty() {
        return Err(Error::config("spectral_error needs two nonempty eigenvalue lists"));
    }
    let directed = |a: &[c64], b: &[c64]| {
        a.iter()
            .map(|x| b.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(directed(estimated, reference).max(directed(reference, estimated)))
}

/// Hausdorff distance plus details: `nearest_i` (distance of estimate `i` to
/// the reference set) and, for equal cardinalities, `assignment_max` and
/// `assignment_mean` of the optimal one-to-one matching.
pub fn spectral_error_report(estimated: &[c64], reference: &[c64]) -> Result<ScoreReport> {
    let value = spectral_error(estimated, reference)?;
    let mut details = BTreeMap::new();
    for (i, x) in estimated.iter().enumerate() {
        let d = reference.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min);
        details.insert(format!("nearest_{i}"), d);
    }
    if estimated.len() == reference.len() {
        let cost: Vec<Vec<f64>> =
            estimated.iter().map(|x| reference.iter().map(|y| (x - y).norm()).collect()).collect();
        let assignment = min_cost_assignment(&cost);
        let dists: Vec<f64> = assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).collect();
        details.insert("assignment_max".into(), dists.iter().copied().fold(0.0, f64::max));
        details.insert("assignment_mean".into(), dists.iter().sum::<f64>() / dists.len() as f64);
    }
    Ok(ScoreReport { metric: "spectral_error".into(), value, details })
}

/// Hungarian algorithm on a square cost matrix; returns the column for each row.
fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

/// `1 - |⟨ψ̂, ψ⟩_w| / (‖ψ̂‖_w ‖ψ‖_w)`, invariant to complex rescaling of either argument.
pub fn eigfn_error(estimated: &[c64], reference: &[c64], weights: &[f64]) -> Result<f64> {
    if estimated.len() != reference.len() {
        return Err(Error::DimensionMismatch { expected: reference.len(), got: estimated.len() });
    }
    if weights.len() != reference.len() {
        return Err(Error::DimensionMismatch { expected: reference.len(), got: weights.len() });
    }
    if weights.iter().any(|w| !(*w >= 0.0)) || !weights.iter().any(|w| *w > 0.0) {
        return Err(Error::config("weights must be nonnegative and not all zero"));
    }
    let mut inner = c64::new(0.0, 0.0);
    let (mut na, mut nb) = (0.0, 0.0);
    for ((a, b), w) in estimated.iter().zip(reference).zip(weights) {
        inner += a.conj() * b * *w;
        na += w * a.norm_sqr();
        nb += w * b.norm_sqr();
    }
    if !(na > 0.0) || !(nb > 0.0) {
        return Err(Error::config("eigenfunction has zero weighted norm"));
    }
    Ok((1.0 - inner.norm() / (na.sqrt() * nb.sqrt())).clamp(0.0, 1.0))
}

fn centered_covariance(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let n = a.nrows() as f64;
    let mean = |m: MatRef<'_, f64>, j: usize| (0..m.nrows()).map(|i| m[(i, j)]).sum::<f64>() / n;
    let ma: Vec<f64> = (0..a.ncols()).map(|j| mean(a, j)).collect();
    let mb: Vec<f64> = (0..b.ncols()).map(|j| mean(b, j)).collect();
    let ac = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - ma[j]);
    let bc = Mat::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] - mb[j]);
    let mut c = ac.transpose() * bc;
    c *= faer::Scale(1.0 / n);
    c
}

/// VAMP-2 score on centered empirical covariances: the sum of the top `rank`
/// squared singular values of `(C_X + γ)^{-1/2} C_XY (C_Y + γ)^{-1/2}`.
pub fn vamp2_score(fx: MatRef<'_, f64>, fy: MatRef<'_, f64>, rank: usize, tikhonov: f64) -> Result<f64> {
    if fx.nrows() != fy.nrows() {
        return Err(Error::DimensionMismatch { expected: fx.nrows(), got: fy.nrows() });
    }
    if fx.ncols() != fy.ncols() {
        return Err(Error::DimensionMismatch { expected: fx.ncols(), got: fy.ncols() });
    }
    let k = fx.ncols();
    if rank == 0 || rank > k {
        return Err(Error::config(format!("rank must lie in [1, {k}], got {rank}")));
    }
    if !(tikhonov >= 0.0) {
        return Err(Error::config("tikhonov must be nonnegative"));
    }
    if fx.nrows() < 2 {
        return Err(Error::config("VAMP-2 needs at least two samples"));
    }
    let wx = inverse_sqrt_psd(&centered_covariance(fx, fx), tikhonov, "feature covariance C_X")?;
    let wy = inverse_sqrt_psd(&centered_covariance(fy, fy), tikhonov, "feature covariance C_Y")?;
    let t = &wx * centered_covariance(fx, fy) * &wy;
    let sv = t.singular_values().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    Ok(sv.iter().take(rank).map(|s| s * s).sum())
}

/// Multi-step predictor used by [`forecast_rmse`].
pub trait Forecaster {
    /// `steps × q` forecasts from the state `x0`, row `k` being `k + 1` steps ahead.
    fn forecast(&self, x0: &[f64], steps: usize) -> Result<Mat<f64>>;
}

/// Forecasts of a fitted model for an observable given by its training-target values.
pub enum ModelForecaster<'a> {
    Rollout { model: &'a FittedOperator, f_y: MatRef<'a, f64> },
    Spectral { decomp: SpectralDecomposition<'a>, modes: ModeSet },
}

impl<'a> ModelForecaster<'a> {
    pub fn new(model: &'a FittedOperator, f_y: MatRef<'a, f64>, method: ForecastMethod) -> Result<Self> {
        match method {
            ForecastMethod::Rollout => Ok(ModelForecaster::Rollout { model, f_y }),
            ForecastMethod::Spectral => {
                let decomp = spectral::eig_decomposition(model)?;
                let modes = spectral::compute_modes(&decomp, f_y)?;
                Ok(ModelForecaster::Spectral { decomp, modes })
            }
        }
    }
}

impl Forecaster for ModelForecaster<'_> {
    fn forecast(&self, x0: &[f64], steps: usize) -> Result<Mat<f64>> {
        match self {
            ModelForecaster::Rollout { model, f_y } => {
                Ok(spectral::predict(model, x0, *f_y, steps, ForecastMethod::Rollout)?.values)
            }
            ModelForecaster::Spectral { decomp, modes } => {
                Ok(spectral::spectral_forecast(decomp, modes, x0, steps)?.values)
            }
        }
    }
}

/// Per-horizon RMSE over every start index of `test` with a target in range.
///
/// `observable` holds the observable on each row of `test` (identity when
/// `None`). `value` is the mean over horizons; details hold `horizon_h`.
pub fn forecast_rmse(
    forecaster: &dyn Forecaster,
    test: &DataMatrix,
    observable: Option<&DataMatrix>,
    horizons: &[usize],
) -> Result<ScoreReport> {
    let target = observable.unwrap_or(test);
    if target.nrows() != test.nrows() {
        return Err(Error::DimensionMismatch { expected: test.nrows(), got: target.nrows() });
    }
    if horizons.is_empty() {
        return Err(Error::config("at least one horizon is required"));
    }
    let t = test.nrows();
    for &h in horizons {
        if h == 0 {
            return Err(Error::config("horizons must be at least 1"));
        }
        if h >= t {
            return Err(Error::config(format!("horizon {h} is not shorter than the test trajectory ({t} rows)")));
        }
    }
    let max_h = *horizons.iter().max().expect("nonempty");
    let q = target.ncols();
    let mut sq = vec![0.0; max_h + 1];
    let mut counts = vec![0usize; max_h + 1];
    for start in 0..t - 1 {
        let steps = max_h.min(t - 1 - start);
        let pred = forecaster.forecast(test.row(start), steps)?;
        if pred.ncols() != q {
            return Err(Error::DimensionMismatch { expected: q, got: pred.ncols() });
        }
        for h in 1..=steps {
            let truth = target.row(start + h);
            for c in 0..q {
                let e = pred[(h - 1, c)] - truth[c];
                sq[h] += e * e;
            }
            counts[h] += 1;
        }
    }
    let mut details = BTreeMap::new();
    let mut total = 0.0;
    for &h in horizons {
        let rmse = (sq[h] / (counts[h] * q) as f64).sqrt();
        details.insert(format!("horizon_{h}"), rmse);
        total += rmse;
    }
    Ok(ScoreReport { metric: "forecast_rmse".into(), value: total / horizons.len() as f64, details })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    #[test]
    fn spectral_error_examples() {
        let a = [c(1.0, 0.0), c(0.5, 0.2), c(0.5, -0.2)];
        assert_eq!(spectral_error(&a, &a).unwrap(), 0.0);
        assert!((spectral_error(&[c(1.0, 0.0)], &[c(0.5, 0.0)]).unwrap() - 0.5).abs() < 1e-15);
        assert!((spectral_error(&[c(1.0, 0.0), c(0.2, 0.0)], &[c(1.0, 0.0)]).unwrap() - 0.8).abs() < 1e-15);
        assert!(spectral_error(&[], &a).is_err());
    }

    #[test]
    fn assignment_distance() {
        let est = [c(0.9, 0.0), c(0.1, 0.0)];
        let r = spectral_error_report(&est, &[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!((r.details["assignment_max"] - 0.1).abs() < 1e-12);
        let r = spectral_error_report(&est, &[c(1.0, 0.0)]).unwrap();
        assert!(!r.details.contains_key("assignment_max"));
    }

    #[test]
    fn hungarian_matches_brute_force() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = min_cost_assignment(&cost);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn eigfn_error_examples() {
        let psi = [c(1.0, 0.0), c(-0.5, 0.3), c(0.2, 0.1)];
        let w = [0.2, 0.5, 0.3];
        assert!(eigfn_error(&psi, &psi, &w).unwrap() < 1e-15);
        let scaled: Vec<c64> = psi.iter().map(|v| v * c(3.0, -2.0)).collect();
        assert!(eigfn_error(&scaled, &psi, &w).unwrap() < 1e-15);
        let a = [c(1.0, 0.0), c(0.0, 0.0)];
        let b = [c(0.0, 0.0), c(1.0, 0.0)];
        assert_eq!(eigfn_error(&a, &b, &[1.0, 1.0]).unwrap(), 1.0);
        assert!(eigfn_error(&a, &b, &[0.0, 0.0]).is_err());
        assert!(eigfn_error(&[c(0.0, 0.0), c(0.0, 0.0)], &b, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn vamp2_identity_features() {
        let mut rng = crate::rng::seeded(4);
        let fx = Mat::from_fn(500, 3, |_, _| crate::rng::normal(&mut rng));
        let s = vamp2_score(fx.as_ref(), fx.as_ref(), 3, 0.0).unwrap();
        assert!((s - 3.0).abs() < 1e-6);
    }

    #[test]
    fn vamp2_invariant_under_reparameterization() {
        let mut rng = crate::rng::seeded(5);
        let n = 1000;
        let fx = Mat::from_fn(n, 2, |_, _| crate::rng::normal(&mut rng));
        let fy = Mat::from_fn(n, 2, |i, j| 0.7 * fx[(i, j)] + 0.3 * crate::rng::normal(&mut rng));
        let t = Mat::from_fn(2, 2, |i, j| [[1.3, -0.4], [0.2, 0.8]][i][j]);
        let base = vamp2_score(fx.as_ref(), fy.as_ref(), 2, 0.0).unwrap();
        let moved = vamp2_score((&fx * &t).as_ref(), (&fy * &t).as_ref(), 2, 0.0).unwrap();
        assert!((base - moved).abs() < 1e-6);
    }

    #[test]
    fn vamp2_singular_without_regularization() {
        let fx = Mat::from_fn(10, 2, |i, _| i as f64);
        assert!(matches!(vamp2_score(fx.as_ref(), fx.as_ref(), 1, 0.0), Err(Error::Singular(_))));
    }

    struct Zero;
    impl Forecaster for Zero {
        fn forecast(&self, _: &[f64], steps: usize) -> Result<Mat<f64>> {
            Ok(Mat::zeros(steps, 1))
        }
    }

    #[test]
    fn forecast_rmse_zero_predictor() {
        let test = DataMatrix::new(3, 1, vec![1.0, 1.0, 1.0]).unwrap();
        let r = forecast_rmse(&Zero, &test, None, &[1]).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.details["horizon_1"], 1.0);
        assert!(forecast_rmse(&Zero, &test, None, &[3]).is_err());
        assert!(forecast_rmse(&Zero, &test, None, &[0]).is_err());
    }

    #[test]
    fn report_json_field_names() {
        let r = ScoreReport { metric: "m".into(), value: 1.5, details: BTreeMap::from([("a".into(), 2.0)]) };
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["metric"], "m");
        assert_eq!(v["value"], 1.5);
        assert_eq!(v["details"]["a"], 2.0);
    }

    fn points() -> impl Strategy<Value = Vec<c64>> {
        prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| c64::new(a, b)), 1..6)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn hausdorff_is_a_metric(a in points(), b in points(), c in points()) {
            let ab = spectral_error(&a, &b).unwrap();
            let ba = spectral_error(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(spectral_error(&a, &a).unwrap(), 0.0);
            let ac = spectral_error(&a, &c).unwrap();
            let cb = spectral_error(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-12);
        }

        #[test]
        fn eigfn_error_scale_invariant(re in -3.0..3.0f64, im in -3.0..3.0f64, vals in prop::collection::vec(-1.0..1.0f64, 4..10)) {
            prop_assume!(re.abs() + im.abs() > 1e-3);
            let psi: Vec<c64> = vals.iter().enumerate().map(|(i, v)| c64::new(*v, 0.1 * i as f64)).collect();
            let w = vec![1.0; psi.len()];
            let a = c64::new(re, im);
            let scaled: Vec<c64> = psi.iter().map(|v| v * a).collect();
            prop_assert!(eigfn_error(&scaled, &psi, &w).unwrap() < 1e-12);
        }
    }
}

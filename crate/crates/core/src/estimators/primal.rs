//! Explicit-feature (primal) estimators, used as an independent reference for
//! the dual solvers. Dense decompositions only; meant for small feature
//! dimensions.
//!
//! With `A = φ(X)`, `B = φ(Y)`, `C_X = AᵀA/n`, `C_XY = AᵀB/n`:
//!
//! - Ridge: `G = (C_X + γI)⁻¹ C_XY`
//! - PCR:   `G = W_r (W_rᵀ C_X W_r + γI)⁻¹ W_rᵀ C_XY`, `W_r` the top-r eigenvectors of `C_X`
//! - RRR:   `G = (C_X + γI)^{-1/2} ⟦(C_X + γI)^{-1/2} C_XY⟧_r`, truncated SVD

use faer::{c64, Mat, MatRef};

use super::{EstimatorConfig, Method, SnapshotPair};
use crate::error::{Error, Result};
use crate::kernels::DataMatrix;
use crate::linalg::{inverse_sqrt_psd, scaled, RegularizedSolver, SymEigen};
use crate::rng;

#[derive(Clone, Debug)]
pub enum FeatureMap {
    Identity,
    /// `φ(x) = √(2/D) cos(Ωx + b)` with `Ω ~ N(0, ℓ⁻²)` and `b ~ U[0, 2π)`.
    RandomFourier { omega: Mat<f64>, phase: Vec<f64>, seed: u64 },
}

impl FeatureMap {
    pub fn random_fourier(input_dim: usize, features: usize, lengthscale: f64, seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        let mut omega = Mat::<f64>::zeros(features, input_dim);
        for i in 0..features {
            for j in 0..input_dim {
                omega[(i, j)] = rng::normal(&mut r) / lengthscale;
            }
        }
        let phase = (0..features).map(|_| 2.0 * std::f64::consts::PI * rng::uniform(&mut r)).collect();
        FeatureMap::RandomFourier { omega, phase, seed }
    }

    /// Feature matrix, one row per sample.
    pub fn apply(&self, x: &DataMatrix) -> Mat<f64> {
        match self {
            FeatureMap::Identity => x.to_mat(),
            FeatureMap::RandomFourier { omega, phase, .. } => {
                let d = omega.nrows();
                let s = (2.0 / d as f64).sqrt();
                let proj = x.to_mat() * omega.transpose();
                Mat::from_fn(x.nrows(), d, |i, j| s * (proj[(i, j)] + phase[j]).cos())
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct PrimalOperator {
    pub feature_map: FeatureMap,
    pub g: Mat<f64>,
}

/// Eigenpairs of `G`, sorted by (modulus, real part, imaginary part) descending.
pub struct PrimalSpectrum {
    pub eigenvalues: Vec<c64>,
    pub vectors: Mat<c64>,
}

impl PrimalOperator {
    /// `φ(x)ᵀ G w` for every row of `x`.
    pub fn predict(&self, x: &DataMatrix, w: MatRef<'_, f64>) -> Mat<f64> {
        self.feature_map.apply(x) * (&self.g * w)
    }

    pub fn spectrum(&self) -> Result<PrimalSpectrum> {
        let evd = self.g.eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let s = evd.S().column_vector();
        let u = evd.U();
        let mut order: Vec<usize> = (0..s.nrows()).collect();
        order.sort_by(|&a, &b| crate::spectral::eigenvalue_order(s[a], s[b]));
        let eigenvalues = order.iter().map(|&i| s[i]).collect();
        let vectors = Mat::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
        Ok(PrimalSpectrum { eigenvalues, vectors })
    }
}

pub fn fit_primal_oracle(
    feature_map: &FeatureMap,
    config: &EstimatorConfig,
    pairs: &SnapshotPair,
) -> Result<PrimalOperator> {
    config.validate()?;
    let n = pairs.len() as f64;
    let a = feature_map.apply(&pairs.x);
    let b = feature_map.apply(&pairs.y);
    let df = a.ncols();
    let cx = scaled((a.transpose() * &a).as_ref(), 1.0 / n);
    let cxy = scaled((a.transpose() * &b).as_ref(), 1.0 / n);
    let gamma = config.tikhonov;
    let g = match config.method {
        Method::Ridge => {
            let solver = RegularizedSolver::new(&cx, gamma, config.pseudo_inverse, "C_X + γI")?;
            solver.solve(cxy.as_ref())
        }
        Method::Pcr { rank } => {
            if rank > df {
                return Err(Error::RankExceedsData { requested: rank, available: df });
            }
            let eig = SymEigen::new(cx.as_ref())?;
            let w = eig.vectors.subcols(0, rank);
            let proj = w.transpose() * &cxy;
            let mut scaled_proj = proj;
            for i in 0..rank {
                let s = 1.0 / (eig.values[i] + gamma);
                for j in 0..df {
                    scaled_proj[(i, j)] *= s;
                }
            }
            w * scaled_proj
        }
        Method::Rrr { rank } => {
            if rank > df {
                return Err(Error::RankExceedsData { requested: rank, available: df });
            }
            let whiten = inverse_sqrt_psd(&cx, gamma, "C_X + γI")?;
            let m = &whiten * &cxy;
            let svd = m.thin_svd().map_err(|e| Error::Eigen(format!("{e:?}")))?;
            let s = svd.S().column_vector();
            let ur = svd.U().subcols(0, rank);
            let vr = svd.V().subcols(0, rank);
            let mut us = ur.to_owned();
            for j in 0..rank {
                for i in 0..df {
                    us[(i, j)] *= s[j];
                }
            }
            &whiten * (us * vr.transpose())
        }
        _ => return Err(Error::config("the primal oracle supports ridge, pcr and rrr")),
    };
    Ok(PrimalOperator { feature_map: feature_map.clone(), g })
}

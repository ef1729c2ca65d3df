//! Estimators of the finite-rank evolution operator.
//!
//! Every estimator produces a [`FittedOperator`] acting on an observable `f`
//! (given by its values `f_Y` on the training targets) as
//!
//! ```text
//! f̂(x) = k(x, centers) · U · (Vᵀ f_Y)
//! ```
//!
//! where `centers` are the training inputs, or the inducing points for
//! Nyström estimators.

mod config;
mod nystrom;
mod primal;
mod solvers;

pub use config::{EstimatorConfig, Method, NystromBase};
pub use nystrom::nystrom_fit;
pub use primal::{fit_primal_oracle, FeatureMap, PrimalOperator};
pub use solvers::{pcr_dual_solve, randomized_rrr_solve, ridge_dual_solve, rrr_dual_solve, RrrSolution};

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gram_matrix, DataMatrix, KernelSpec};

/// Time-lagged regression pairs: `y[i]` is observed `lag` steps after `x[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotPair {
    pub x: DataMatrix,
    pub y: DataMatrix,
    pub lag: usize,
}

impl SnapshotPair {
    pub fn new(x: DataMatrix, y: DataMatrix, lag: usize) -> Result<Self> {
        if x.nrows() != y.nrows() || x.ncols() != y.ncols() {
            return Err(Error::DimensionMismatch { expected: x.nrows() * x.ncols(), got: y.nrows() * y.ncols() });
        }
        if x.nrows() < 2 {
            return Err(Error::config("need at least two snapshot pairs"));
        }
        if lag == 0 {
            return Err(Error::config("lag must be positive"));
        }
        Ok(Self { x, y, lag })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Applies the same row permutation to both sides.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        Self::new(self.x.select_rows(perm)?, self.y.select_rows(perm)?, self.lag)
    }
}

/// Pairs rows `0..T−lag` with rows `lag..T`.
pub fn build_pairs(trajectory: &DataMatrix, lag: usize) -> Result<SnapshotPair> {
    let t = trajectory.nrows();
    if lag == 0 {
        return Err(Error::config("lag must be positive"));
    }
    if t <= lag {
        return Err(Error::TrajectoryTooShort { len: t, lag });
    }
    let x = trajectory.slice_rows(0, t - lag)?;
    let y = trajectory.slice_rows(lag, t)?;
    SnapshotPair::new(x, y, lag)
}

/// A learned evolution operator in dual coordinates. Immutable once built.
#[derive(Clone, Debug)]
pub struct FittedOperator {
    kernel: KernelSpec,
    config: EstimatorConfig,
    lag: usize,
    x_train: DataMatrix,
    y_train: DataMatrix,
    inducing: Option<Vec<usize>>,
    centers: DataMatrix,
    u: Mat<f64>,
    v: Mat<f64>,
    singular_values: Option<Vec<f64>>,
}

impl FittedOperator {
    /// Assembles an operator from stored parts, checking shapes.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        kernel: KernelSpec,
        config: EstimatorConfig,
        pairs: SnapshotPair,
        inducing: Option<Vec<usize>>,
        u: Mat<f64>,
        v: Mat<f64>,
        singular_values: Option<Vec<f64>>,
    ) -> Result<Self> {
        let SnapshotPair { x, y, lag } = pairs;
        let n = x.nrows();
        let centers = match &inducing {
            Some(idx) => {
                if idx.iter().any(|&i| i >= n) {
                    return Err(Error::Corrupt("inducing index out of range".into()));
                }
                x.select_rows(idx)?
            }
            None => x.clone(),
        };
        if u.nrows() != centers.nrows() {
            return Err(Error::DimensionMismatch { expected: centers.nrows(), got: u.nrows() });
        }
        if v.nrows() != n || v.ncols() != u.ncols() {
            return Err(Error::DimensionMismatch { expected: n, got: v.nrows() });
        }
        if let Some(s) = &singular_values {
            if s.len() != u.ncols() {
                return Err(Error::DimensionMismatch { expected: u.ncols(), got: s.len() });
            }
        }
        Ok(Self { kernel, config, lag, x_train: x, y_train: y, inducing, centers, u, v, singular_values })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn x_train(&self) -> &DataMatrix {
        &self.x_train
    }

    pub fn y_train(&self) -> &DataMatrix {
        &self.y_train
    }

    /// Points the rows of `U` are attached to.
    pub fn centers(&self) -> &DataMatrix {
        &self.centers
    }

    pub fn inducing(&self) -> Option<&[usize]> {
        self.inducing.as_deref()
    }

    pub fn u(&self) -> MatRef<'_, f64> {
        self.u.as_ref()
    }

    pub fn v(&self) -> MatRef<'_, f64> {
        self.v.as_ref()
    }

    /// Squared singular values of the whitened cross-covariance (RRR family).
    pub fn singular_values(&self) -> Option<&[f64]> {
        self.singular_values.as_deref()
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn n_samples(&self) -> usize {
        self.x_train.nrows()
    }

    pub fn state_dim(&self) -> usize {
        self.x_train.ncols()
    }

    /// `k(points, centers)`.
    pub fn feature_gram(&self, points: &DataMatrix) -> Result<Mat<f64>> {
        gram_matrix(&self.kernel, points, &self.centers)
    }

    /// One-step prediction `k(x, centers) U Vᵀ f_Y` for every row of `points`.
    pub fn predict_one_step(&self, points: &DataMatrix, f_y: MatRef<'_, f64>) -> Result<Mat<f64>> {
        if f_y.nrows() != self.n_samples() {
            return Err(Error::DimensionMismatch { expected: self.n_samples(), got: f_y.nrows() });
        }
        let k = self.feature_gram(points)?;
        let w = self.v.transpose() * f_y;
        Ok(k * (&self.u * w))
    }
}

/// Fits the configured estimator on `pairs`.
pub fn fit(config: &EstimatorConfig, kernel: &KernelSpec, pairs: &SnapshotPair) -> Result<FittedOperator> {
    kernel.validate()?;
    let n = pairs.len();
    config.validate_for(n)?;
    let gamma = config.tikhonov;
    let pinv = config.pseudo_inverse;
    if let Method::Nystrom { base, rank, inducing, seed } = config.method {
        return nystrom_fit(base, kernel, pairs, gamma, rank, inducing, seed, config);
    }
    let kx = gram_matrix(kernel, &pairs.x, &pairs.x)?;
    let (u, v, sv) = match config.method {
        Method::Ridge => {
            let (u, v) = ridge_dual_solve(&kx, gamma, pinv)?;
            (u, v, None)
        }
        Method::Pcr { rank } => {
            let (u, v) = pcr_dual_solve(&kx, gamma, rank)?;
            (u, v, None)
        }
        Method::Rrr { rank } => {
            let ky = gram_matrix(kernel, &pairs.y, &pairs.y)?;
            let s = rrr_dual_solve(&kx, &ky, gamma, rank, pinv)?;
            (s.u, s.v, Some(s.sigma_sq))
        }
        Method::RandRrr { rank, oversample, power_iters, seed } => {
            let ky = gram_matrix(kernel, &pairs.y, &pairs.y)?;
            let s = randomized_rrr_solve(&kx, &ky, gamma, rank, oversample, power_iters, seed, pinv)?;
            (s.u, s.v, Some(s.sigma_sq))
        }
        Method::Nystrom { .. } => unreachable!(),
    };
    FittedOperator::from_parts(*kernel, *config, pairs.clone(), None, u, v, sv)
}

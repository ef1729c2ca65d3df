//! Spectral decomposition of a fitted operator, modes and forecasting.
//!
//! For an operator `f̂(x) = k(x, C) U Vᵀ f_Y` the eigenfunctions live in the
//! span of `k(·, C) U`, and their coordinates are eigenvectors of the
//! restriction matrix `M = Vᵀ K(Y, C) U` (r × r). Zero singular directions of
//! `M` are compressed away first, so the decomposition keeps only the
//! numerically nonzero spectrum (relative cutoff `1e-12`).
//!
//! Conventions:
//! - eigenvalues are sorted by (modulus, real part, imaginary part), descending;
//! - right eigenfunctions have unit empirical norm on the training inputs and
//!   their largest-modulus training value is real positive;
//! - left eigenfunctions are expanded on the training targets and satisfy
//!   `Σ_l left_j(l) ψ_k(y_l) = δ_jk`, so modes are `m_j = Σ_l left_j(l) f(y_l)`
//!   and `f̂(x, t) = Σ_j λ_jᵗ ψ_j(x) m_j`.

use std::cmp::Ordering;

use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::FittedOperator;
use crate::kernels::{gram_matrix, DataMatrix};

const COMPRESSION_CUTOFF: f64 = 1e-12;
const CONDITION_CUTOFF: f64 = 1e-6;

/// Descending order by modulus, then real part, then imaginary part.
pub fn eigenvalue_order(a: c64, b: c64) -> Ordering {
    b.norm()
        .total_cmp(&a.norm())
        .then(b.re.total_cmp(&a.re))
        .then(b.im.total_cmp(&a.im))
}

fn to_complex(m: MatRef<'_, f64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m[(i, j)], 0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenSide {
    Right,
    Left,
}

#[derive(Clone, Debug)]
pub struct SpectralDecomposition<'a> {
    model: &'a FittedOperator,
    eigenvalues: Vec<c64>,
    right_coeffs: Mat<c64>,
    left_coeffs: Mat<c64>,
    diagonalizable: bool,
}

pub fn eig_decomposition(model: &FittedOperator) -> Result<SpectralDecomposition<'_>> {
    let r = model.rank();
    if r == 0 {
        return Err(Error::config("operator has rank 0"));
    }
    let k_yc = gram_matrix(model.kernel(), model.y_train(), model.centers())?;
    let m = model.v().transpose() * (&k_yc * model.u());

    // Compress M = P Σ Rᵀ to its numerical rank s; the nonzero spectrum of M
    // equals the spectrum of Σ Rᵀ P (s × s), with eigenvectors mapped by P.
    let svd = m.thin_svd().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let sv = svd.S().column_vector();
    let smax = sv[0];
    if !(smax > 0.0) {
        return Err(Error::Eigen("restriction matrix is zero".into()));
    }
    let s = (0..r).take_while(|&i| sv[i] > COMPRESSION_CUTOFF * smax).count();
    let (p, n_mat) = if s == r {
        (Mat::<f64>::identity(r, r), m.clone())
    } else {
        let p = svd.U().subcols(0, s).to_owned();
        let rt = svd.V().subcols(0, s);
        let n_mat = Mat::from_fn(s, r, |i, j| sv[i] * rt[(j, i)]);
        (p, n_mat)
    };
    let reduced = &n_mat * &p;

    let evd = reduced.eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let raw_vals = evd.S().column_vector();
    let raw_vecs = evd.U();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| eigenvalue_order(raw_vals[a], raw_vals[b]));
    let mut eigenvalues: Vec<c64> = order.iter().map(|&i| raw_vals[i]).collect();
    let mut z = Mat::from_fn(s, s, |i, j| raw_vecs[(i, order[j])]);

    // exact conjugate pairs
    let mut j = 0;
    while j + 1 < s {
        let (a, b) = (eigenvalues[j], eigenvalues[j + 1]);
        if a.im > 0.0 && (b - a.conj()).norm() <= 1e-10 * a.norm().max(1e-300) {
            eigenvalues[j + 1] = a.conj();
            for i in 0..s {
                z[(i, j + 1)] = z[(i, j)].conj();
            }
            j += 2;
        } else {
            j += 1;
        }
    }

    // Right eigenfunction coefficients a_j = U P z_j, normalized on X_train.
    let pz = to_complex(p.as_ref()) * &z;
    let mut right = to_complex(model.u()) * &pz;
    let k_xc = to_complex(model.feature_gram(model.x_train())?.as_ref());
    let n = model.n_samples() as f64;
    // second pass removes the cancellation error of the first rescaling
    for pass in 0..2 {
        let values = &k_xc * &right;
        for j in 0..s {
            let col = values.col(j);
            let norm = ((0..col.nrows()).map(|i| col[i].norm_sqr()).sum::<f64>() / n).sqrt();
            let scale = if pass == 0 {
                let mut best = 0;
                for i in 0..col.nrows() {
                    if col[i].norm() > col[best].norm() * (1.0 + 1e-12) {
                        best = i;
                    }
                }
                let lead = col[best];
                lead.conj() / (lead.norm() * norm)
            } else {
                c64::new(1.0 / norm, 0.0)
            };
            for i in 0..right.nrows() {
                right[(i, j)] *= scale;
            }
            for i in 0..s {
                z[(i, j)] *= scale;
            }
        }
    }

    let mut diagonalizable = true;
    let min_abs = eigenvalues.iter().map(|l| l.norm()).fold(f64::INFINITY, f64::min);
    if min_abs <= COMPRESSION_CUTOFF * eigenvalues[0].norm() {
        diagonalizable = false;
    }
    let z_unit = Mat::from_fn(s, s, |i, j| {
        let nrm = (0..s).map(|k| z[(k, j)].norm_sqr()).sum::<f64>().sqrt();
        z[(i, j)] / nrm
    });
    let zsv = z_unit.singular_values().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    if !(zsv[s - 1] > CONDITION_CUTOFF * zsv[0]) {
        diagonalizable = false;
    }

    let left = if diagonalizable {
        // rows of Z⁻¹ are left eigenvectors e_j of the reduced matrix with e_jᵀ z_k = δ;
        // d_j = Nᵀ e_j / λ_j is the left eigenvector of M with d_jᵀ (P z_k) = δ.
        let e = z.partial_piv_lu().inverse().transpose().to_owned();
        let d = to_complex(n_mat.transpose()) * e;
        let mut left = to_complex(model.v()) * d;
        for (j, lam) in eigenvalues.iter().enumerate() {
            let f = (*lam * *lam).inv();
            for i in 0..left.nrows() {
                left[(i, j)] *= f;
            }
        }
        left
    } else {
        log::warn!("restriction matrix is non-diagonalizable within tolerance");
        Mat::zeros(model.n_samples(), s)
    };

    Ok(SpectralDecomposition { model, eigenvalues, right_coeffs: right, left_coeffs: left, diagonalizable })
}

impl<'a> SpectralDecomposition<'a> {
    pub fn model(&self) -> &'a FittedOperator {
        self.model
    }

    pub fn eigenvalues(&self) -> &[c64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// False when the restriction matrix was found non-diagonalizable within tolerance.
    pub fn is_diagonalizable(&self) -> bool {
        self.diagonalizable
    }

    /// Coefficients of the right eigenfunctions against the model centers.
    pub fn right_coeffs(&self) -> MatRef<'_, c64> {
        self.right_coeffs.as_ref()
    }

    /// Coefficients of the left eigenfunctions against the training targets.
    pub fn left_coeffs(&self) -> MatRef<'_, c64> {
        self.left_coeffs.as_ref()
    }

    /// Eigenfunction values, one row per point of `x` and one column per eigenvalue.
    pub fn eval_eigenfunctions(&self, x: &DataMatrix, side: EigenSide) -> Result<Mat<c64>> {
        if x.ncols() != self.model.state_dim() {
            return Err(Error::DimensionMismatch { expected: self.model.state_dim(), got: x.ncols() });
        }
        match side {
            EigenSide::Right => {
                let k = self.model.feature_gram(x)?;
                Ok(to_complex(k.as_ref()) * &self.right_coeffs)
            }
            EigenSide::Left => {
                let k = gram_matrix(self.model.kernel(), x, self.model.y_train())?;
                Ok(to_complex(k.as_ref()) * &self.left_coeffs)
            }
        }
    }

    /// `Σ_j λ_jᵗ ψ_j(x) m_j` for every row of `x`.
    pub fn evolve(&self, modes: &ModeSet, x: &DataMatrix, t: u32) -> Result<Mat<c64>> {
        let psi = self.eval_eigenfunctions(x, EigenSide::Right)?;
        let mut weighted = modes.modes.clone();
        for (j, lam) in self.eigenvalues.iter().enumerate() {
            let p = lam.powu(t);
            for k in 0..weighted.ncols() {
                weighted[(j, k)] *= p;
            }
        }
        Ok(psi * weighted)
    }

    pub fn report(&self) -> SpectrumReport {
        let lag = self.model.lag() as f64;
        SpectrumReport {
            eigenvalues: self.eigenvalues.iter().map(|l| [l.re, l.im]).collect(),
            log_rate: self
                .eigenvalues
                .iter()
                .map(|l| {
                    let lg = l.ln() / lag;
                    [lg.re, lg.im]
                })
                .collect(),
            lag: self.model.lag(),
            diagonalizable: self.diagonalizable,
        }
    }
}

/// JSON form of a spectrum: eigenvalues and `log(λ)/lag` as `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<[f64; 2]>,
    pub log_rate: Vec<[f64; 2]>,
    pub lag: usize,
    pub diagonalizable: bool,
}

/// CSV of eigenfunction values on `grid`: `x0..x{d-1}` then `re_j, im_j` per eigenfunction.
pub fn eigenfunctions_csv(decomp: &SpectralDecomposition<'_>, grid: &DataMatrix, side: EigenSide) -> Result<String> {
    let psi = decomp.eval_eigenfunctions(grid, side)?;
    let mut out = String::new();
    let mut header: Vec<String> = (0..grid.ncols()).map(|j| format!("x{j}")).collect();
    for j in 0..psi.ncols() {
        header.push(format!("re_{j}"));
        header.push(format!("im_{j}"));
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, row) in grid.rows().enumerate() {
        let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        for j in 0..psi.ncols() {
            cells.push(psi[(i, j)].re.to_string());
            cells.push(psi[(i, j)].im.to_string());
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Expansion coefficients of an observable over the eigenfunctions (s × q).
#[derive(Clone, Debug)]
pub struct ModeSet {
    pub modes: Mat<c64>,
}

pub fn compute_modes(decomp: &SpectralDecomposition<'_>, f_y: MatRef<'_, f64>) -> Result<ModeSet> {
    if !decomp.diagonalizable {
        return Err(Error::ModesUndefined);
    }
    if f_y.nrows() != decomp.model.n_samples() {
        return Err(Error::DimensionMismatch { expected: decomp.model.n_samples(), got: f_y.nrows() });
    }
    let modes = decomp.left_coeffs.transpose() * to_complex(f_y);
    Ok(ModeSet { modes })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForecastMethod {
    Rollout,
    Spectral,
}

#[derive(Clone, Debug)]
pub struct Forecast {
    /// steps × q, row `k` is the forecast `k + 1` steps ahead.
    pub values: Mat<f64>,
    /// Largest imaginary part discarded by the spectral method (0 for rollout).
    pub imag_residual: f64,
}

/// Multi-step forecast of the observable with training-target values `f_y`.
///
/// `Rollout` applies the one-step operator repeatedly, feeding the predicted
/// values back in as the next state (so `f_y` must be a state observable,
/// `q = d`). `Spectral` uses `Σ_j λ_jᵏ ψ_j(x0) m_j`.
pub fn predict(
    model: &FittedOperator,
    x0: &[f64],
    f_y: MatRef<'_, f64>,
    steps: usize,
    method: ForecastMethod,
) -> Result<Forecast> {
    if steps == 0 {
        return Err(Error::config("steps must be at least 1"));
    }
    if x0.len() != model.state_dim() {
        return Err(Error::DimensionMismatch { expected: model.state_dim(), got: x0.len() });
    }
    match method {
        ForecastMethod::Rollout => {
            if f_y.ncols() != model.state_dim() {
                return Err(Error::config(format!(
                    "rollout needs a state observable (q = {}), got q = {}",
                    model.state_dim(),
                    f_y.ncols()
                )));
            }
            let w = model.u() * (model.v().transpose() * f_y);
            let mut out = Mat::<f64>::zeros(steps, f_y.ncols());
            let mut state = x0.to_vec();
            for k in 0..steps {
                let point = DataMatrix::new(1, state.len(), state.clone())?;
                let next = model.feature_gram(&point)? * &w;
                for j in 0..next.ncols() {
                    out[(k, j)] = next[(0, j)];
                    state[j] = next[(0, j)];
                }
                if state.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("rollout state"));
                }
            }
            Ok(Forecast { values: out, imag_residual: 0.0 })
        }
        ForecastMethod::Spectral => {
            let decomp = eig_decomposition(model)?;
            let modes = compute_modes(&decomp, f_y)?;
            spectral_forecast(&decomp, &modes, x0, steps)
        }
    }
}

/// Spectral forecast with a precomputed decomposition and modes.
pub fn spectral_forecast(
    decomp: &SpectralDecomposition<'_>,
    modes: &ModeSet,
    x0: &[f64],
    steps: usize,
) -> Result<Forecast> {
    if steps == 0 {
        return Err(Error::config("steps must be at least 1"));
    }
    let point = DataMatrix::new(1, x0.len(), x0.to_vec())?;
    let psi = decomp.eval_eigenfunctions(&point, EigenSide::Right)?;
    let s = decomp.len();
    let q = modes.modes.ncols();
    let mut out = Mat::<f64>::zeros(steps, q);
    let mut residual: f64 = 0.0;
    let mut norm: f64 = 0.0;
    let mut powers: Vec<c64> = decomp.eigenvalues.clone();
    for k in 0..steps {
        for c in 0..q {
            let mut acc = c64::new(0.0, 0.0);
            for j in 0..s {
                acc += powers[j] * psi[(0, j)] * modes.modes[(j, c)];
            }
            out[(k, c)] = acc.re;
            residual = residual.max(acc.im.abs());
            norm = norm.max(acc.re.abs());
        }
        for (p, l) in powers.iter_mut().zip(&decomp.eigenvalues) {
            *p *= *l;
        }
    }
    if residual > 1e-6 * norm.max(f64::MIN_POSITIVE) && residual > 1e-12 {
        return Err(Error::NonRealForecast { residual, norm });
    }
    Ok(Forecast { values: out, imag_residual: residual })
}

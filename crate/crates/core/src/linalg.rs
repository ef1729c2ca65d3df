//! Dense linear-algebra helpers on top of `faer`.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

/// Relative cutoff below which eigenvalues of a PSD matrix are treated as zero.
pub const PSD_FLOOR: f64 = 1e-12;

pub fn trace(a: MatRef<'_, f64>) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// Replace `a` with `(a + aᵀ) / 2`.
pub fn symmetrize(a: &mut Mat<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

pub fn add_diagonal(a: &Mat<f64>, shift: f64) -> Mat<f64> {
    let mut out = a.clone();
    for i in 0..out.nrows() {
        out[(i, i)] += shift;
    }
    out
}

pub fn scaled(a: MatRef<'_, f64>, s: f64) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
///
/// Each eigenvector is signed so that its first component with modulus above
/// `1e-12 · max|v|` is positive.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

impl SymEigen {
    pub fn new(a: MatRef<'_, f64>) -> Result<Self> {
        let evd = a
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let n = a.nrows();
        let s = evd.S().column_vector();
        let u = evd.U();
        let mut values = Vec::with_capacity(n);
        let mut vectors = Mat::<f64>::zeros(n, n);
        for (dst, src) in (0..n).rev().enumerate() {
            values.push(s[src]);
            let col = u.col(src);
            let max = (0..n).map(|i| col[i].abs()).fold(0.0, f64::max);
            let lead = (0..n).map(|i| col[i]).find(|v| v.abs() > 1e-12 * max).unwrap_or(1.0);
            let sign = if lead < 0.0 { -1.0 } else { 1.0 };
            for i in 0..n {
                vectors[(i, dst)] = sign * col[i];
            }
        }
        Ok(Self { values, vectors })
    }

    /// Number of eigenvalues strictly above `PSD_FLOOR · trace`.
    pub fn numerical_rank(&self) -> usize {
        let tr: f64 = self.values.iter().map(|v| v.max(0.0)).sum();
        let cut = PSD_FLOOR * tr;
        self.values.iter().take_while(|&&v| v > cut).count()
    }

    /// Clamp eigenvalues with `|λ| ≤ PSD_FLOOR · trace` to `max(λ, 0)`.
    pub fn floor_psd(&mut self) {
        let tr: f64 = self.values.iter().sum();
        let cut = PSD_FLOOR * tr.abs();
        for v in &mut self.values {
            if v.abs() <= cut {
                *v = v.max(0.0);
            }
        }
    }
}

/// Solver for `(K + shift·I) x = b` with `K` symmetric PSD.
pub enum RegularizedSolver {
    Cholesky(faer::linalg::solvers::Llt<f64>),
    /// Pseudo-inverse through the eigendecomposition, cutoff `PSD_FLOOR · trace`.
    PseudoInverse { vectors: Mat<f64>, inv_values: Vec<f64> },
}

impl RegularizedSolver {
    pub fn new(k: &Mat<f64>, shift: f64, allow_pinv: bool, name: &'static str) -> Result<Self> {
        if shift > 0.0 {
            let reg = add_diagonal(k, shift);
            return reg
                .llt(Side::Lower)
                .map(RegularizedSolver::Cholesky)
                .map_err(|_| Error::Cholesky { matrix: name });
        }
        if allow_pinv {
            let eig = SymEigen::new(k.as_ref())?;
            let tr: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
            let cut = PSD_FLOOR * tr;
            let inv_values = eig.values.iter().map(|&v| if v > cut { 1.0 / v } else { 0.0 }).collect();
            return Ok(RegularizedSolver::PseudoInverse { vectors: eig.vectors, inv_values });
        }
        let singular = || Error::Singular(format!("{name} with zero regularization"));
        let llt = k.llt(Side::Lower).map_err(|_| singular())?;
        let l = llt.L();
        let pivots: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).collect();
        let max = pivots.iter().cloned().fold(0.0, f64::max);
        let min = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min > 1e-14 * max) {
            return Err(singular());
        }
        Ok(RegularizedSolver::Cholesky(llt))
    }

    pub fn solve(&self, rhs: MatRef<'_, f64>) -> Mat<f64> {
        match self {
            RegularizedSolver::Cholesky(llt) => llt.solve(rhs),
            RegularizedSolver::PseudoInverse { vectors, inv_values } => {
                let mut proj = vectors.transpose() * rhs;
                for (i, s) in inv_values.iter().enumerate() {
                    for j in 0..proj.ncols() {
                        proj[(i, j)] *= s;
                    }
                }
                vectors * proj
            }
        }
    }
}

/// Lower Cholesky factor of a symmetric PD matrix; on failure retries with a
/// diagonal jitter of `jitter` (returned as `Some(jitter)` when applied).
pub fn cholesky_with_floor(a: &Mat<f64>, jitter: f64) -> Result<(Mat<f64>, Option<f64>)> {
    if let Ok(llt) = a.llt(Side::Lower) {
        return Ok((llt.L().to_owned(), None));
    }
    let reg = add_diagonal(a, jitter);
    let llt = reg.llt(Side::Lower).map_err(|_| Error::Cholesky { matrix: "inducing-point Gram" })?;
    Ok((llt.L().to_owned(), Some(jitter)))
}

/// Solve `L X = B` in place for lower-triangular `L`.
pub fn solve_lower_in_place(l: MatRef<'_, f64>, b: &mut Mat<f64>) {
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, b.as_mut(), faer::Par::Seq);
}

/// Solve `Lᵀ X = B` in place for lower-triangular `L`.
pub fn solve_lower_transpose_in_place(l: MatRef<'_, f64>, b: &mut Mat<f64>) {
    faer::linalg::triangular_solve::solve_upper_triangular_in_place(
        l.transpose(),
        b.as_mut(),
        faer::Par::Seq,
    );
}

/// Orthonormal basis of the column space of `a` (thin QR).
pub fn orthonormalize(a: &Mat<f64>) -> Mat<f64> {
    a.qr().compute_thin_Q()
}

/// Inverse square root `(A + shift·I)^{-1/2}` of a symmetric PSD matrix.
/// Errors when an eigenvalue of the shifted matrix is not positive.
pub fn inverse_sqrt_psd(a: &Mat<f64>, shift: f64, name: &'static str) -> Result<Mat<f64>> {
    let eig = SymEigen::new(a.as_ref())?;
    let n = a.nrows();
    let tr: f64 = eig.values.iter().map(|v| v.max(0.0)).sum::<f64>() + n as f64 * shift;
    let mut scaled_vecs = eig.vectors.clone();
    for (j, &v) in eig.values.iter().enumerate() {
        let s = v + shift;
        if !(s > PSD_FLOOR * tr) {
            return Err(Error::Singular(format!("{name} is singular")));
        }
        let f = s.sqrt().recip();
        for i in 0..n {
            scaled_vecs[(i, j)] *= f;
        }
    }
    Ok(&scaled_vecs * eig.vectors.transpose())
}

/// Largest `k` eigenpairs of the symmetric tridiagonal matrix with diagonal
/// `diag` and off-diagonal `off`, eigenvalues descending.
///
/// Eigenvalues by Sturm-sequence bisection, eigenvectors by inverse iteration
/// with reorthogonalization; signs follow [`SymEigen`].
pub fn tridiagonal_top_eigen(diag: &[f64], off: &[f64], k: usize) -> Result<SymEigen> {
    let n = diag.len();
    if off.len() + 1 != n || k > n {
        return Err(Error::DimensionMismatch { expected: n.saturating_sub(1), got: off.len() });
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let norm = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let pivmin = f64::MIN_POSITIVE.max(f64::EPSILON * f64::EPSILON * norm * norm);
    // number of eigenvalues strictly below x
    let count_below = |x: f64| {
        let mut q = diag[0] - x;
        let mut c = (q < 0.0) as usize;
        for i in 1..n {
            if q.abs() < pivmin {
                q = -pivmin;
            }
            q = diag[i] - x - off[i - 1] * off[i - 1] / q;
            c += (q < 0.0) as usize;
        }
        c
    };

    let mut values = Vec::with_capacity(k);
    let mut vectors = Mat::<f64>::zeros(n, k);
    for j in 0..k {
        // the (n - j)-th smallest: smallest x with count_below(x) ≥ n - j
        let (mut a, mut b) = (lo - f64::EPSILON * norm, hi + f64::EPSILON * norm);
        while b - a > 2.0 * f64::EPSILON * norm {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if count_below(mid) >= n - j {
                b = mid;
            } else {
                a = mid;
            }
        }
        let mu = 0.5 * (a + b);
        values.push(mu);

        let shift = mu + f64::EPSILON * norm;
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7 + j * 13) % 17) as f64 / 17.0).collect();
        for _ in 0..4 {
            v = tridiagonal_solve(diag, off, shift, &v);
            for p in 0..j {
                let dot: f64 = (0..n).map(|i| vectors[(i, p)] * v[i]).sum();
                for (i, vi) in v.iter_mut().enumerate() {
                    *vi -= dot * vectors[(i, p)];
                }
            }
            let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(nrm > 0.0 && nrm.is_finite()) {
                return Err(Error::Eigen("inverse iteration broke down".into()));
            }
            v.iter_mut().for_each(|x| *x /= nrm);
        }
        let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let lead = v.iter().copied().find(|x| x.abs() > 1e-12 * max).unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, j)] = sign * v[i];
        }
    }
    Ok(SymEigen { values, vectors })
}

// (T − shift·I) x = b by Gaussian elimination with partial pivoting.
fn tridiagonal_solve(diag: &[f64], off: &[f64], shift: f64, b: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let tiny = f64::EPSILON * diag.iter().chain(off).fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    // rows hold (l, d, u, u2) of the banded upper factor
    let mut d: Vec<f64> = diag.iter().map(|x| x - shift).collect();
    let mut u: Vec<f64> = off.to_vec();
    u.push(0.0);
    let mut u2 = vec![0.0; n];
    let mut rhs = b.to_vec();
    let mut low: Vec<f64> = off.to_vec();
    for i in 0..n.saturating_sub(1) {
        if low[i].abs() > d[i].abs() {
            // swap rows i and i+1
            let (di, ui, u2i) = (d[i], u[i], u2[i]);
            d[i] = low[i];
            u[i] = d[i + 1];
            u2[i] = u[i + 1];
            let f = di / d[i];
            d[i + 1] = ui - f * u[i];
            u[i + 1] = u2i - f * u2[i];
            rhs.swap(i, i + 1);
            rhs[i + 1] -= f * rhs[i];
        } else {
            if d[i].abs() < tiny {
                d[i] = tiny;
            }
            let f = low[i] / d[i];
            d[i + 1] -= f * u[i];
            rhs[i + 1] -= f * rhs[i];
        }
        low[i] = 0.0;
    }
    if d[n - 1].abs() < tiny {
        d[n - 1] = tiny;
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = rhs[i];
        if i + 1 < n {
            acc -= u[i] * x[i + 1];
        }
        if i + 2 < n {
            acc -= u2[i] * x[i + 2];
        }
        x[i] = acc / d[i];
    }
    x
}

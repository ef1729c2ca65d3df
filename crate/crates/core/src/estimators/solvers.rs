//! Dual solvers working directly on Gram matrices.
//!
//! Notation: `n` samples, `B = K_X + nγI`, `S = K_X B⁻¹` (symmetric PSD, it
//! commutes with `K_X`). The reduced-rank problem is
//! `(1/n) K_Y K_X α = σ² B α`; with `ζ = Bα` it becomes the eigenproblem of
//! `K_Y S / n`, which is symmetrized through a factor `K_Y = F Fᵀ`:
//! the nonzero eigenpairs follow from the symmetric matrix `Fᵀ S F / n`.

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{orthonormalize, symmetrize, RegularizedSolver, SymEigen, PSD_FLOOR};
use crate::rng;

#[derive(Clone, Debug)]
pub struct RrrSolution {
    pub u: Mat<f64>,
    pub v: Mat<f64>,
    /// Nonincreasing.
    pub sigma_sq: Vec<f64>,
}

fn check_square(k: &Mat<f64>) -> Result<usize> {
    if k.nrows() != k.ncols() {
        return Err(Error::DimensionMismatch { expected: k.nrows(), got: k.ncols() });
    }
    Ok(k.nrows())
}

/// Kernel ridge regression in the eigenbasis `K_X = Q Λ Qᵀ`:
/// `U = Q diag(1/(λ + nγ))`, `V = Q`, so that `U Vᵀ = (K_X + nγI)⁻¹`.
///
/// With `γ = 0` the system must be nonsingular (eigenvalues above `1e-12·trace`)
/// unless `pseudo_inverse` is set, in which case the null directions are dropped.
pub fn ridge_dual_solve(kx: &Mat<f64>, tikhonov: f64, pseudo_inverse: bool) -> Result<(Mat<f64>, Mat<f64>)> {
    let n = check_square(kx)?;
    if tikhonov < 0.0 {
        return Err(Error::config("tikhonov must be nonnegative"));
    }
    let mut eig = SymEigen::new(kx.as_ref())?;
    eig.floor_psd();
    let shift = n as f64 * tikhonov;
    let keep = if shift > 0.0 {
        n
    } else {
        let rank = eig.numerical_rank();
        if rank < n && !pseudo_inverse {
            return Err(Error::Singular("K_X + nγI with zero regularization".into()));
        }
        rank
    };
    let u = Mat::from_fn(n, keep, |i, j| eig.vectors[(i, j)] / (eig.values[j] + shift));
    let v = eig.vectors.subcols(0, keep).to_owned();
    Ok((u, v))
}

/// Principal component regression (kernel DMD).
///
/// With `(λᵢ, qᵢ)` the top-`r` eigenpairs of `K_X`: `U = Q diag(√(n/λ))`, so
/// that `Uᵀ K_X U = n I`, and `V = Q diag(√(λ/n) / (λ + nγ))`.
pub fn pcr_dual_solve(kx: &Mat<f64>, tikhonov: f64, rank: usize) -> Result<(Mat<f64>, Mat<f64>)> {
    let n = check_square(kx)?;
    let mut eig = SymEigen::new(kx.as_ref())?;
    eig.floor_psd();
    let available = eig.numerical_rank();
    if rank > available {
        return Err(Error::RankExceedsData { requested: rank, available });
    }
    let nf = n as f64;
    let mut u = Mat::<f64>::zeros(n, rank);
    let mut v = Mat::<f64>::zeros(n, rank);
    for j in 0..rank {
        let lam = eig.values[j];
        let su = (nf / lam).sqrt();
        let sv = (lam / nf).sqrt() / (lam + nf * tikhonov);
        for i in 0..n {
            let q = eig.vectors[(i, j)];
            u[(i, j)] = q * su;
            v[(i, j)] = q * sv;
        }
    }
    Ok((u, v))
}

/// Builds `U = α·√n / √(ζᵀSζ)` and `V = K_X U / n` from `α = B⁻¹ζ` and `Sζ = K_X α`,
/// normalizing each column so that `αᵀ K_X B α / n = 1`.
fn assemble(alpha: Mat<f64>, s_zeta: Mat<f64>, zeta_s_zeta: &[f64], n: usize) -> (Mat<f64>, Mat<f64>) {
    let nf = n as f64;
    let mut u = alpha;
    let mut v = s_zeta;
    for (j, &q) in zeta_s_zeta.iter().enumerate() {
        let su = (nf / q).sqrt();
        for i in 0..n {
            u[(i, j)] *= su;
            v[(i, j)] *= su / nf;
        }
    }
    (u, v)
}

/// Exact kernel reduced-rank regression.
pub fn rrr_dual_solve(
    kx: &Mat<f64>,
    ky: &Mat<f64>,
    tikhonov: f64,
    rank: usize,
    pseudo_inverse: bool,
) -> Result<RrrSolution> {
    let n = check_square(kx)?;
    if ky.nrows() != n || ky.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: ky.nrows() });
    }
    let nf = n as f64;
    let solver = RegularizedSolver::new(kx, nf * tikhonov, pseudo_inverse, "K_X + nγI")?;

    let mut ey = SymEigen::new(ky.as_ref())?;
    ey.floor_psd();
    let k = ey.numerical_rank();
    if rank > k {
        return Err(Error::RankExceedsData { requested: rank, available: k });
    }
    // K_Y ≈ F Fᵀ over the numerically nonzero spectrum
    let f = Mat::from_fn(n, k, |i, j| ey.vectors[(i, j)] * ey.values[j].sqrt());
    let b_inv_f = solver.solve(f.as_ref());
    let s_f = kx * &b_inv_f;
    let mut h = f.transpose() * &s_f;
    h = crate::linalg::scaled(h.as_ref(), 1.0 / nf);
    symmetrize(&mut h);

    let eh = SymEigen::new(h.as_ref())?;
    let cut = PSD_FLOOR * eh.values.iter().map(|v| v.max(0.0)).sum::<f64>();
    if eh.values[rank - 1] <= cut {
        let available = eh.values.iter().take_while(|&&v| v > cut).count();
        return Err(Error::RankExceedsData { requested: rank, available });
    }
    let top = eh.vectors.subcols(0, rank);
    let sigma_sq: Vec<f64> = eh.values[..rank].to_vec();
    let alpha = &b_inv_f * top;
    let s_zeta = &s_f * top;
    // ζᵀ S ζ = n σ² for unit h
    let q: Vec<f64> = sigma_sq.iter().map(|s| nf * s).collect();
    let (u, v) = assemble(alpha, s_zeta, &q, n);
    Ok(RrrSolution { u, v, sigma_sq })
}

/// Randomized reduced-rank regression.
///
/// A Gaussian sketch `Ω` (n × (r+p), filled column by column from the seeded
/// generator) is pushed `q` times through `K_Y S / n` with re-orthonormalization;
/// the reduced problem is then solved by Rayleigh–Ritz on `span(Ω)` in the
/// `ζ` coordinates, i.e. `F₁ c = σ² F₀ c` with `F₀ = Ωᵀ S Ω` and
/// `F₁ = Ωᵀ S K_Y S Ω / n`.
#[allow(clippy::too_many_arguments)]
pub fn randomized_rrr_solve(
    kx: &Mat<f64>,
    ky: &Mat<f64>,
    tikhonov: f64,
    rank: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
    pseudo_inverse: bool,
) -> Result<RrrSolution> {
    let n = check_square(kx)?;
    if ky.nrows() != n || ky.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: ky.nrows() });
    }
    let l = rank + oversample;
    if l > n {
        return Err(Error::config(format!("rank + oversample = {l} exceeds sample count {n}")));
    }
    let nf = n as f64;
    let solver = RegularizedSolver::new(kx, nf * tikhonov, pseudo_inverse, "K_X + nγI")?;

    let mut rng = rng::seeded(seed);
    let mut omega = Mat::<f64>::zeros(n, l);
    for j in 0..l {
        for i in 0..n {
            omega[(i, j)] = rng::normal(&mut rng);
        }
    }
    for _ in 0..power_iters {
        let s_omega = kx * solver.solve(omega.as_ref());
        let next = ky * s_omega;
        omega = orthonormalize(&next);
    }

    let b_inv_omega = solver.solve(omega.as_ref());
    let t = kx * &b_inv_omega;
    let mut f0 = omega.transpose() * &t;
    symmetrize(&mut f0);
    let mut f1 = t.transpose() * (ky * &t);
    f1 = crate::linalg::scaled(f1.as_ref(), 1.0 / nf);
    symmetrize(&mut f1);

    let e0 = SymEigen::new(f0.as_ref())?;
    let cut0 = PSD_FLOOR * e0.values.iter().map(|v| v.max(0.0)).sum::<f64>();
    let kept = e0.values.iter().take_while(|&&v| v > cut0).count();
    if rank > kept {
        return Err(Error::RankExceedsData { requested: rank, available: kept });
    }
    let z = Mat::from_fn(l, kept, |i, j| e0.vectors[(i, j)] / e0.values[j].sqrt());
    let mut h = z.transpose() * &f1 * &z;
    symmetrize(&mut h);
    let eh = SymEigen::new(h.as_ref())?;
    let cut = PSD_FLOOR * eh.values.iter().map(|v| v.max(0.0)).sum::<f64>();
    if eh.values[rank - 1] <= cut {
        let available = eh.values.iter().take_while(|&&v| v > cut).count();
        return Err(Error::RankExceedsData { requested: rank, available });
    }
    let c = &z * eh.vectors.subcols(0, rank);
    let sigma_sq = eh.values[..rank].to_vec();
    let alpha = &b_inv_omega * &c;
    let s_zeta = &t * &c;
    // cᵀ F₀ c = 1 by construction
    let (u, v) = assemble(alpha, s_zeta, &vec![1.0; rank], n);
    Ok(RrrSolution { u, v, sigma_sq })
}

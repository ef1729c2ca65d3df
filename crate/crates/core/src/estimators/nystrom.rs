//! Nyström estimators.
//!
//! `m` inducing indices `J` are drawn uniformly without replacement. With
//! `K_JJ = L Lᵀ`, the inputs get explicit coordinates `A = K_{X,J} L⁻ᵀ`
//! (an orthonormal basis of `span{φ(x_j) : j ∈ J}`), and the targets the
//! analogous `B = K_{Y,J'} L_Y⁻ᵀ` built from the paired outputs `y_j`. The
//! PCR / RRR problems are then solved in these `m`-dimensional coordinates,
//! costing `O(n·m² + m³)` time and `O(n·m)` memory.

use faer::Mat;

use super::{EstimatorConfig, FittedOperator, NystromBase, SnapshotPair};
use crate::error::{Error, Result};
use crate::kernels::{gram_matrix, DataMatrix, KernelSpec};
use crate::linalg::{
    cholesky_with_floor, inverse_sqrt_psd, scaled, solve_lower_in_place, solve_lower_transpose_in_place, symmetrize,
    trace, SymEigen, PSD_FLOOR,
};
use crate::rng;

/// Transposed inducing coordinates `Aᵀ = L⁻¹ K_{J,X}` (m × n) and the factor `L`.
fn inducing_coordinates(
    kernel: &KernelSpec,
    points: &DataMatrix,
    inducing: &DataMatrix,
    tikhonov: f64,
) -> Result<(Mat<f64>, Mat<f64>)> {
    let kjj = gram_matrix(kernel, inducing, inducing)?;
    let m = kjj.nrows();
    let jitter = tikhonov.max(PSD_FLOOR) * trace(kjj.as_ref()) / m as f64;
    let (l, applied) = cholesky_with_floor(&kjj, jitter)?;
    if let Some(j) = applied {
        log::warn!("inducing-point Gram is singular (duplicate points?); regularized with {j:e}");
    }
    let mut at = gram_matrix(kernel, inducing, points)?;
    solve_lower_in_place(l.as_ref(), &mut at);
    Ok((at, l))
}

#[allow(clippy::too_many_arguments)]
pub fn nystrom_fit(
    base: NystromBase,
    kernel: &KernelSpec,
    pairs: &SnapshotPair,
    tikhonov: f64,
    rank: usize,
    inducing: usize,
    seed: u64,
    config: &EstimatorConfig,
) -> Result<FittedOperator> {
    let n = pairs.len();
    if inducing == 0 || inducing > n {
        return Err(Error::config(format!("inducing must be in 1..={n}")));
    }
    if rank > inducing {
        return Err(Error::config(format!("rank {rank} exceeds inducing points {inducing}")));
    }
    let mut r = rng::seeded(seed);
    let idx = rng::sample_without_replacement(&mut r, n, inducing);
    let x_ind = pairs.x.select_rows(&idx)?;
    let nf = n as f64;

    let (at, l) = inducing_coordinates(kernel, &pairs.x, &x_ind, tikhonov)?;
    let mut cov = scaled((&at * at.transpose()).as_ref(), 1.0 / nf);
    symmetrize(&mut cov);

    let (w, v_scale, sigma_sq) = match base {
        NystromBase::Pcr => {
            let eig = SymEigen::new(cov.as_ref())?;
            let available = eig.numerical_rank();
            if rank > available {
                return Err(Error::RankExceedsData { requested: rank, available });
            }
            let w = eig.vectors.subcols(0, rank).to_owned();
            let scale: Vec<f64> = eig.values[..rank].iter().map(|lam| 1.0 / (lam + tikhonov)).collect();
            (w, scale, None)
        }
        NystromBase::Rrr => {
            let y_ind = pairs.y.select_rows(&idx)?;
            let (bt, _) = inducing_coordinates(kernel, &pairs.y, &y_ind, tikhonov)?;
            let cxy = scaled((&at * bt.transpose()).as_ref(), 1.0 / nf);
            let whiten = inverse_sqrt_psd(&cov, tikhonov, "Nyström input covariance")?;
            let wc = &whiten * &cxy;
            let mut h = &wc * wc.transpose();
            symmetrize(&mut h);
            let eh = SymEigen::new(h.as_ref())?;
            let cut = PSD_FLOOR * eh.values.iter().map(|v| v.max(0.0)).sum::<f64>();
            if eh.values[rank - 1] <= cut {
                let available = eh.values.iter().take_while(|&&v| v > cut).count();
                return Err(Error::RankExceedsData { requested: rank, available });
            }
            let w = &whiten * eh.vectors.subcols(0, rank);
            (w, vec![1.0; rank], Some(eh.values[..rank].to_vec()))
        }
    };

    let mut u = w.clone();
    solve_lower_transpose_in_place(l.as_ref(), &mut u);
    let mut v = at.transpose() * &w;
    for (j, s) in v_scale.iter().enumerate() {
        for i in 0..n {
            v[(i, j)] *= s / nf;
        }
    }
    FittedOperator::from_parts(*kernel, *config, pairs.clone(), Some(idx), u, v, sigma_sq)
}

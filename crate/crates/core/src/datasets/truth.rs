//! Reference spectra computed independently of the estimators.

use faer::{c64, Mat};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::noise::{binomial, normalization, CosineNoise};
use super::SystemSpec;
use crate::error::{Error, Result};
use crate::linalg::tridiagonal_top_eigen;
use crate::rng;
use crate::spectral::eigenvalue_order;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    FiniteRank,
    GridGenerator,
    Ulam,
}

/// Reference eigenvalues and eigenfunctions on a 1-d grid.
///
/// Eigenfunctions are Koopman (right) eigenfunctions, normalized to unit norm
/// in `L²(invariant_density)` with the largest-modulus grid value real positive.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthSpectrum {
    pub eigenvalues: Vec<c64>,
    pub grid: Vec<f64>,
    /// grid × k
    pub eigenfunctions: Mat<c64>,
    /// Probability weights on the grid (sum to 1).
    pub invariant_density: Vec<f64>,
    pub provenance: Provenance,
    /// False when the mesh-doubling check failed.
    pub converged: bool,
}

#[derive(Serialize, Deserialize)]
struct RawTruth {
    provenance: Provenance,
    converged: bool,
    eigenvalues: Vec<[f64; 2]>,
    grid: Vec<f64>,
    eigenfunctions: Vec<Vec<[f64; 2]>>,
    invariant_density: Vec<f64>,
}

impl GroundTruthSpectrum {
    pub fn to_json(&self) -> Result<String> {
        let raw = RawTruth {
            provenance: self.provenance,
            converged: self.converged,
            eigenvalues: self.eigenvalues.iter().map(|l| [l.re, l.im]).collect(),
            grid: self.grid.clone(),
            eigenfunctions: (0..self.eigenfunctions.ncols())
                .map(|j| (0..self.grid.len()).map(|i| {
                    let v = self.eigenfunctions[(i, j)];
                    [v.re, v.im]
                }).collect())
                .collect(),
            invariant_density: self.invariant_density.clone(),
        };
        Ok(serde_json::to_string_pretty(&raw)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawTruth = serde_json::from_str(text)?;
        let n = raw.grid.len();
        if raw.invariant_density.len() != n || raw.eigenfunctions.iter().any(|c| c.len() != n) {
            return Err(Error::Corrupt("ground-truth arrays disagree with grid length".into()));
        }
        let k = raw.eigenfunctions.len();
        let eigenfunctions = Mat::from_fn(n, k, |i, j| {
            let [re, im] = raw.eigenfunctions[j][i];
            c64::new(re, im)
        });
        Ok(GroundTruthSpectrum {
            eigenvalues: raw.eigenvalues.iter().map(|&[re, im]| c64::new(re, im)).collect(),
            grid: raw.grid,
            eigenfunctions,
            invariant_density: raw.invariant_density,
            provenance: raw.provenance,
            converged: raw.converged,
        })
    }

    /// Values of eigenfunction `j` on the grid.
    pub fn eigenfunction(&self, j: usize) -> Vec<c64> {
        (0..self.grid.len()).map(|i| self.eigenfunctions[(i, j)]).collect()
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn composite_rule(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (nodes, weights) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (x, w) in nodes.iter().zip(&weights) {
            out.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * w));
        }
    }
    out
}

fn logistic(x: f64) -> f64 {
    4.0 * x * (1.0 - x)
}

fn midpoints(lo: f64, hi: f64, cells: usize) -> Vec<f64> {
    let h = (hi - lo) / cells as f64;
    (0..cells).map(|i| lo + (i as f64 + 0.5) * h).collect()
}

/// Scales each column to unit weighted norm and makes its largest entry real positive.
fn normalize_columns(f: &mut Mat<c64>, weights: &[f64]) {
    for j in 0..f.ncols() {
        let norm = (0..f.nrows()).map(|i| weights[i] * f[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        let mut best = 0;
        for i in 0..f.nrows() {
            if f[(i, j)].norm() > f[(best, j)].norm() * (1.0 + 1e-12) {
                best = i;
            }
        }
        let lead = f[(best, j)];
        let scale = lead.conj() / (lead.norm() * norm);
        for i in 0..f.nrows() {
            f[(i, j)] *= scale;
        }
    }
}

fn sorted_eig(m: &Mat<f64>) -> Result<(Vec<c64>, Mat<c64>)> {
    let evd = m.eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let vals = evd.S().column_vector();
    let vecs = evd.U();
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eigenvalue_order(vals[a], vals[b]));
    let values = order.iter().map(|&i| vals[i]).collect();
    let vectors = Mat::from_fn(m.nrows(), m.nrows(), |i, j| vecs[(i, order[j])]);
    Ok((values, vectors))
}

/// Exact spectrum of the noisy logistic map with noise order `N`.
///
/// The transition density `C_N cosᴺ(π(y - F(x)))` splits by the binomial
/// theorem into `Σ_k w_k α_k(F(x)) α_k(y)` with `w_k = C_N binom(N, k)` and
/// `α_k(t) = cosᵏ(πt) sinᴺ⁻ᵏ(πt)`, so the operator has rank `N + 1` and its
/// nonzero spectrum is that of `M_kl = √(w_k w_l) ∫ α_k(y) α_l(F(y)) dy`.
/// Eigenfunctions are returned on `grid_points` cell midpoints of `[0, 1]`.
pub fn noisy_logistic_truth(order: u32, grid_points: usize) -> Result<GroundTruthSpectrum> {
    if order % 2 != 0 {
        return Err(Error::config(format!("noise order must be even, got {order}")));
    }
    if order > 64 {
        return Err(Error::config(format!("noise order must be at most 64, got {order}")));
    }
    if grid_points < 2 {
        return Err(Error::config("grid_points must be at least 2"));
    }
    let n = order as usize;
    let c_n = normalization(order);
    let sqrt_w: Vec<f64> = (0..=order).map(|k| (c_n * binomial(order, k)).sqrt()).collect();
    let pi = std::f64::consts::PI;
    let alpha = |k: usize, t: f64| (pi * t).cos().powi(k as i32) * (pi * t).sin().powi((n - k) as i32);

    let rule = composite_rule(0.0, 1.0, 256, 20);
    let mut m = Mat::<f64>::zeros(n + 1, n + 1);
    for &(y, w) in &rule {
        let fy = logistic(y);
        let a_y: Vec<f64> = (0..=n).map(|k| alpha(k, y)).collect();
        let a_fy: Vec<f64> = (0..=n).map(|k| alpha(k, fy)).collect();
        for k in 0..=n {
            for l in 0..=n {
                m[(k, l)] += w * sqrt_w[k] * sqrt_w[l] * a_y[k] * a_fy[l];
            }
        }
    }

    let (eigenvalues, vectors) = sorted_eig(&m)?;
    let grid = midpoints(0.0, 1.0, grid_points);

    // stationary density ρ = Σ_k d_k √w_k α_k with Mᵀ d = d
    let (left_vals, left_vecs) = sorted_eig(&m.transpose().to_owned())?;
    let one = (0..=n)
        .min_by(|&a, &b| (left_vals[a] - 1.0).norm().total_cmp(&(left_vals[b] - 1.0).norm()))
        .expect("nonempty");
    let d: Vec<f64> = (0..=n).map(|k| left_vecs[(k, one)].re).collect();
    let mut density: Vec<f64> = grid
        .iter()
        .map(|&g| (0..=n).map(|k| d[k] * sqrt_w[k] * alpha(k, g)).sum::<f64>())
        .collect();
    let total: f64 = density.iter().sum();
    for v in density.iter_mut() {
        *v = (*v / total).max(0.0);
    }
    let total: f64 = density.iter().sum();
    for v in density.iter_mut() {
        *v /= total;
    }

    let mut eigenfunctions = Mat::from_fn(grid_points, n + 1, |i, j| {
        let fg = logistic(grid[i]);
        let mut acc = c64::new(0.0, 0.0);
        for l in 0..=n {
            acc += vectors[(l, j)] * (sqrt_w[l] * alpha(l, fg));
        }
        acc
    });
    normalize_columns(&mut eigenfunctions, &density);

    Ok(GroundTruthSpectrum {
        eigenvalues,
        grid,
        eigenfunctions,
        invariant_density: density,
        provenance: Provenance::FiniteRank,
        converged: true,
    })
}

/// `V(x) = 4(x⁸ + 0.8e^{-80x²} + 0.2e^{-80(x-0.5)²} + 0.5e^{-40(x+0.5)²})`.
pub fn quadwell_potential(x: f64) -> f64 {
    4.0 * (x.powi(8)
        + 0.8 * (-80.0 * x * x).exp()
        + 0.2 * (-80.0 * (x - 0.5).powi(2)).exp()
        + 0.5 * (-40.0 * (x + 0.5).powi(2)).exp())
}

pub fn quadwell_potential_derivative(x: f64) -> f64 {
    4.0 * (8.0 * x.powi(7)
        - 128.0 * x * (-80.0 * x * x).exp()
        - 32.0 * (x - 0.5) * (-80.0 * (x - 0.5).powi(2)).exp()
        - 40.0 * (x + 0.5) * (-40.0 * (x + 0.5).powi(2)).exp())
}

struct GeneratorSpectrum {
    nu: Vec<f64>,
    grid: Vec<f64>,
    psi: Mat<f64>,
    density: Vec<f64>,
}

// Nearest-neighbour rates r_{i→j} = (β⁻¹/h²) exp(-β(V_j - V_i)/2) satisfy detailed
// balance with π ∝ exp(-βV), so D^{1/2} Q D^{-1/2} is symmetric tridiagonal
// with off-diagonal β⁻¹/h². Boundaries reflect (no outward rate).
fn generator_spectrum(beta: f64, lo: f64, hi: f64, points: usize, k: usize) -> Result<GeneratorSpectrum> {
    let h = (hi - lo) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| lo + i as f64 * h).collect();
    let v: Vec<f64> = grid.iter().map(|&x| quadwell_potential(x)).collect();
    let c = 1.0 / (beta * h * h);
    let mut diag = vec![0.0; points];
    for i in 0..points {
        if i > 0 {
            diag[i] -= c * (-beta * (v[i - 1] - v[i]) / 2.0).exp();
        }
        if i + 1 < points {
            diag[i] -= c * (-beta * (v[i + 1] - v[i]) / 2.0).exp();
        }
    }
    let k = k.min(points);
    let eig = tridiagonal_top_eigen(&diag, &vec![c; points - 1], k)?;
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    let mut density: Vec<f64> = v.iter().map(|&x| (-beta * (x - vmin)).exp()).collect();
    let total: f64 = density.iter().sum();
    for p in density.iter_mut() {
        *p /= total;
    }
    let psi = Mat::from_fn(points, k, |i, j| eig.vectors[(i, j)] / density[i].sqrt());
    Ok(GeneratorSpectrum { nu: eig.values[..k].to_vec(), grid, psi, density })
}

/// Quadruple-well Langevin reference from a finite-difference generator.
///
/// Eigenvalues are `exp(lag_time·ν)` for the leading `k` generator eigenvalues
/// `ν`. The grid is `points` equispaced nodes on `[lo, hi]`; `converged` records
/// whether `λ₁` moves by less than `1e-3` when the grid is doubled.
pub fn langevin_truth(
    beta: f64,
    lag_time: f64,
    lo: f64,
    hi: f64,
    points: usize,
    k: usize,
) -> Result<GroundTruthSpectrum> {
    if !(beta > 0.0) || !(lag_time > 0.0) {
        return Err(Error::config("beta and lag_time must be positive"));
    }
    if points < 100 {
        return Err(Error::config(format!("grid needs at least 100 points, got {points}")));
    }
    if !(lo < hi) || lo > -0.75 || hi < 0.75 {
        return Err(Error::config("grid must cover the wells in [-0.75, 0.75]"));
    }
    if k < 2 {
        return Err(Error::config("at least two eigenpairs are required"));
    }
    let coarse = generator_spectrum(beta, lo, hi, points, k)?;
    let fine = generator_spectrum(beta, lo, hi, 2 * points, 2)?;
    let l1 = (lag_time * coarse.nu[1]).exp();
    let l1_fine = (lag_time * fine.nu[1]).exp();
    let converged = (l1 - l1_fine).abs() < 1e-3;
    if !converged {
        log::warn!("Langevin reference not converged: λ₁ = {l1} vs {l1_fine} on the doubled grid");
    }
    let mut eigenfunctions = Mat::from_fn(points, coarse.nu.len(), |i, j| c64::new(coarse.psi[(i, j)], 0.0));
    normalize_columns(&mut eigenfunctions, &coarse.density);
    Ok(GroundTruthSpectrum {
        eigenvalues: coarse.nu.iter().map(|&nu| c64::new((lag_time * nu).exp(), 0.0)).collect(),
        grid: coarse.grid,
        eigenfunctions,
        invariant_density: coarse.density,
        provenance: Provenance::GridGenerator,
        converged,
    })
}

/// Row-stochastic Ulam transition matrix on `cells` equal cells of `[0, 1]`.
pub fn ulam_transition_matrix(spec: &SystemSpec, cells: usize, samples_per_cell: usize, seed: u64) -> Result<Mat<f64>> {
    spec.validate()?;
    if cells < 2 {
        return Err(Error::config("cells must be at least 2"));
    }
    let h = 1.0 / cells as f64;
    let edges: Vec<f64> = (0..=cells).map(|j| j as f64 * h).collect();
    let rows: Vec<Vec<f64>> = match *spec {
        SystemSpec::NoisyLogisticMap { order } => {
            let noise = CosineNoise::new(order)?;
            let (nodes, weights) = gauss_legendre(8);
            (0..cells)
                .into_par_iter()
                .map(|i| {
                    let mut row = vec![0.0; cells];
                    for (t, w) in nodes.iter().zip(&weights) {
                        let x = edges[i] + 0.5 * h * (t + 1.0);
                        let fx = logistic(x);
                        let mut prev = noise.antiderivative(edges[0] - fx);
                        for j in 0..cells {
                            let next = noise.antiderivative(edges[j + 1] - fx);
                            row[j] += 0.5 * w * (next - prev);
                            prev = next;
                        }
                    }
                    row
                })
                .collect()
        }
        SystemSpec::LogisticMap { r } => {
            if samples_per_cell == 0 {
                return Err(Error::config("samples_per_cell must be positive"));
            }
            let mut rng = rng::seeded(seed);
            (0..cells)
                .map(|i| {
                    let mut row = vec![0.0; cells];
                    for _ in 0..samples_per_cell {
                        let x = edges[i] + h * rng::uniform(&mut rng);
                        let y = r * x * (1.0 - x);
                        let j = ((y / h) as usize).min(cells - 1);
                        row[j] += 1.0;
                    }
                    row
                })
                .collect()
        }
        _ => return Err(Error::config(format!("Ulam discretization needs a 1-d map system, got {}", spec.name()))),
    };

    let mut p = Mat::<f64>::zeros(cells, cells);
    for (i, row) in rows.iter().enumerate() {
        let sum: f64 = row.iter().sum();
        for (j, v) in row.iter().enumerate() {
            p[(i, j)] = v / sum;
        }
    }

    Ok(p)
}

/// Ulam discretization of a map system on `cells` equal cells of `[0, 1]`.
///
/// The noisy logistic map uses exact transition probabilities (closed-form
/// noise CDF, Gauss–Legendre in `x`); other maps use `samples_per_cell`
/// seeded uniform samples per cell. Returns all eigenvalues and the leading `k`
/// eigenfunctions at cell midpoints.
pub fn ulam_truth(
    spec: &SystemSpec,
    cells: usize,
    samples_per_cell: usize,
    seed: u64,
    k: usize,
) -> Result<GroundTruthSpectrum> {
    let p = ulam_transition_matrix(spec, cells, samples_per_cell, seed)?;

    // stationary distribution by power iteration on πP = π
    let mut pi = vec![1.0 / cells as f64; cells];
    let mut next = vec![0.0; cells];
    for it in 0..100_000 {
        next.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..cells {
            let w = pi[i];
            for j in 0..cells {
                next[j] += w * p[(i, j)];
            }
        }
        let total: f64 = next.iter().sum();
        let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a / total - b).abs()).sum();
        for (a, b) in pi.iter_mut().zip(&next) {
            *a = b / total;
        }
        if diff < 1e-14 {
            break;
        }
        if it == 99_999 {
            log::warn!("stationary distribution did not converge");
        }
    }

    let (eigenvalues, vectors) = sorted_eig(&p)?;
    let k = k.min(cells);
    let mut eigenfunctions = vectors.subcols(0, k).to_owned();
    normalize_columns(&mut eigenfunctions, &pi);
    Ok(GroundTruthSpectrum {
        eigenvalues,
        grid: midpoints(0.0, 1.0, cells),
        eigenfunctions,
        invariant_density: pi,
        provenance: Provenance::Ulam,
        converged: true,
    })
}

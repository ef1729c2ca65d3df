//! Kernel functions and Gram matrices.
//!
//! A kernel fixes the (implicit) feature map of the latent linear model; every
//! estimator works with Gram matrices of the chosen kernel. No centering is
//! applied anywhere.

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples stored row-major: row `i` is the state `xᵢ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDataMatrix", into = "RawDataMatrix")]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl TryFrom<RawDataMatrix> for DataMatrix {
    type Error = Error;
    fn try_from(raw: RawDataMatrix) -> Result<Self> {
        DataMatrix::new(raw.rows, raw.cols, raw.values)
    }
}

impl From<DataMatrix> for RawDataMatrix {
    fn from(m: DataMatrix) -> Self {
        RawDataMatrix { rows: m.rows, cols: m.cols, values: m.values }
    }
}

impl DataMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::config("data matrix needs at least one row and one column"));
        }
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("data matrix"));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, got: r.len() });
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, values)
    }

    pub fn from_mat(m: &Mat<f64>) -> Result<Self> {
        let values = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect();
        Self::new(m.nrows(), m.ncols(), values)
    }

    pub fn to_mat(&self) -> Mat<f64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self.values[i * self.cols + j])
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Rows `start..end` as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        Self::new(end - start, self.cols, self.values[start * self.cols..end * self.cols].to_vec())
    }

    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self::new(idx.len(), self.cols, values)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernel", into = "RawKernel")]
pub enum KernelSpec {
    /// `exp(−‖x−y‖² / (2ℓ²))`
    Gaussian { lengthscale: f64 },
    /// `exp(−‖x−y‖₁ / ℓ)`
    Laplacian { lengthscale: f64 },
    /// `⟨x, y⟩`
    Linear,
    /// `(⟨x, y⟩ + c)^p`
    Polynomial { degree: u32, offset: f64 },
}

#[derive(Serialize, Deserialize)]
struct RawKernel {
    family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lengthscale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    degree: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<f64>,
}

impl TryFrom<RawKernel> for KernelSpec {
    type Error = Error;
    fn try_from(raw: RawKernel) -> Result<Self> {
        let need_ls = || raw.lengthscale.ok_or_else(|| Error::config("kernel needs \"lengthscale\""));
        let spec = match raw.family.as_str() {
            "gaussian" => KernelSpec::Gaussian { lengthscale: need_ls()? },
            "laplacian" => KernelSpec::Laplacian { lengthscale: need_ls()? },
            "linear" => KernelSpec::Linear,
            "polynomial" => KernelSpec::Polynomial {
                degree: raw.degree.ok_or_else(|| Error::config("polynomial kernel needs \"degree\""))?,
                offset: raw.offset.unwrap_or(0.0),
            },
            other => return Err(Error::config(format!("unknown kernel family {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<KernelSpec> for RawKernel {
    fn from(k: KernelSpec) -> Self {
        let (family, lengthscale, degree, offset) = match k {
            KernelSpec::Gaussian { lengthscale } => ("gaussian", Some(lengthscale), None, None),
            KernelSpec::Laplacian { lengthscale } => ("laplacian", Some(lengthscale), None, None),
            KernelSpec::Linear => ("linear", None, None, None),
            KernelSpec::Polynomial { degree, offset } => ("polynomial", None, Some(degree), Some(offset)),
        };
        RawKernel { family: family.into(), lengthscale, degree, offset }
    }
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Gaussian { lengthscale } | KernelSpec::Laplacian { lengthscale } => {
                if !(lengthscale > 0.0 && lengthscale.is_finite()) {
                    return Err(Error::config("lengthscale must be positive"));
                }
            }
            KernelSpec::Linear => {}
            KernelSpec::Polynomial { degree, offset } => {
                if degree < 1 {
                    return Err(Error::config("polynomial degree must be at least 1"));
                }
                if !(offset >= 0.0 && offset.is_finite()) {
                    return Err(Error::config("polynomial offset must be nonnegative"));
                }
            }
        }
        Ok(())
    }

    /// Kernel value without input checks; `x` and `y` must have equal length.
    #[inline]
    pub fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Gaussian { lengthscale } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * lengthscale * lengthscale)).exp()
            }
            KernelSpec::Laplacian { lengthscale } => {
                let d1: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
                (-d1 / lengthscale).exp()
            }
            KernelSpec::Linear => dot(x, y),
            KernelSpec::Polynomial { degree, offset } => (dot(x, y) + offset).powi(degree as i32),
        }
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kernel input"));
    }
    Ok(spec.eval_unchecked(x, y))
}

/// `K[i][j] = k(xᵢ, zⱼ)`. When `z` equals `x` only the upper triangle is
/// evaluated and mirrored, so the result is exactly symmetric.
pub fn gram_matrix(spec: &KernelSpec, x: &DataMatrix, z: &DataMatrix) -> Result<Mat<f64>> {
    if x.ncols() != z.ncols() {
        return Err(Error::DimensionMismatch { expected: x.ncols(), got: z.ncols() });
    }
    let same = std::ptr::eq(x, z) || x == z;
    let (n, m) = (x.nrows(), z.nrows());
    // Rows are computed independently, so the result does not depend on the
    // number of worker threads.
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            let start = if same { i } else { 0 };
            (start..m).map(|j| spec.eval_unchecked(xi, z.row(j))).collect()
        })
        .collect();
    let mut k = Mat::<f64>::zeros(n, m);
    for (i, row) in rows.iter().enumerate() {
        let start = if same { i } else { 0 };
        for (off, &v) in row.iter().enumerate() {
            let j = start + off;
            k[(i, j)] = v;
            if same {
                k[(j, i)] = v;
            }
        }
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymEigen;
    use crate::rng;
    use proptest::prelude::*;

    fn random_data(seed: u64, n: usize, d: usize) -> DataMatrix {
        let mut r = rng::seeded(seed);
        let v = (0..n * d).map(|_| rng::normal(&mut r)).collect();
        DataMatrix::new(n, d, v).unwrap()
    }

    #[test]
    fn closed_form_values() {
        let g = KernelSpec::Gaussian { lengthscale: 1.0 };
        assert_eq!(kernel_eval(&g, &[0.3, -0.2], &[0.3, -0.2]).unwrap(), 1.0);
        assert!((kernel_eval(&g, &[0.0], &[1.0]).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(kernel_eval(&KernelSpec::Linear, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        let p = KernelSpec::Polynomial { degree: 2, offset: 1.0 };
        assert_eq!(kernel_eval(&p, &[1.0], &[2.0]).unwrap(), 9.0);
        let l = KernelSpec::Laplacian { lengthscale: 2.0 };
        assert!((kernel_eval(&l, &[0.0, 0.0], &[1.0, -1.0]).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn eval_errors() {
        let g = KernelSpec::Gaussian { lengthscale: 1.0 };
        assert!(matches!(kernel_eval(&g, &[0.0], &[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(kernel_eval(&g, &[f64::NAN], &[0.0]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn gram_shapes_and_diagonal() {
        let g = KernelSpec::Gaussian { lengthscale: 0.7 };
        let x = random_data(1, 1, 2);
        let z = random_data(2, 1, 2);
        let k = gram_matrix(&g, &x, &z).unwrap();
        assert_eq!((k.nrows(), k.ncols()), (1, 1));
        assert_eq!(k[(0, 0)], kernel_eval(&g, x.row(0), z.row(0)).unwrap());

        let x = random_data(3, 20, 3);
        let k = gram_matrix(&g, &x, &x).unwrap();
        for i in 0..20 {
            assert_eq!(k[(i, i)], 1.0);
        }
        let bad = random_data(4, 5, 2);
        assert!(gram_matrix(&g, &x, &bad).is_err());
    }

    #[test]
    fn gaussian_gram_psd_n50() {
        let g = KernelSpec::Gaussian { lengthscale: 1.0 };
        let x = random_data(11, 50, 2);
        let k = gram_matrix(&g, &x, &x).unwrap();
        let eig = SymEigen::new(k.as_ref()).unwrap();
        let tr = crate::linalg::trace(k.as_ref());
        assert!(*eig.values.last().unwrap() >= -1e-10 * tr / 50.0);
    }

    #[test]
    fn linear_gram_is_outer_product() {
        let x = random_data(5, 30, 4);
        let z = random_data(6, 17, 4);
        let k = gram_matrix(&KernelSpec::Linear, &x, &z).unwrap();
        let xz = x.to_mat() * z.to_mat().transpose();
        for i in 0..30 {
            for j in 0..17 {
                assert!((k[(i, j)] - xz[(i, j)]).abs() <= 1e-12 * xz[(i, j)].abs().max(1.0));
            }
        }
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let s: KernelSpec = serde_json::from_str(r#"{"family":"gaussian","lengthscale":0.5}"#).unwrap();
        assert_eq!(s, KernelSpec::Gaussian { lengthscale: 0.5 });
        let back = serde_json::to_string(&s).unwrap();
        assert_eq!(back, r#"{"family":"gaussian","lengthscale":0.5}"#);
        assert!(serde_json::from_str::<KernelSpec>(r#"{"family":"gaussian"}"#).is_err());
        assert!(serde_json::from_str::<KernelSpec>(r#"{"family":"laplacian","lengthscale":-1}"#).is_err());
        assert!(serde_json::from_str::<KernelSpec>(r#"{"family":"polynomial","degree":0}"#).is_err());
        let p: KernelSpec = serde_json::from_str(r#"{"family":"polynomial","degree":3,"offset":1}"#).unwrap();
        assert_eq!(p, KernelSpec::Polynomial { degree: 3, offset: 1.0 });
    }

    fn kernel_strategy() -> impl Strategy<Value = KernelSpec> {
        prop_oneof![
            (0.1f64..3.0).prop_map(|l| KernelSpec::Gaussian { lengthscale: l }),
            (0.1f64..3.0).prop_map(|l| KernelSpec::Laplacian { lengthscale: l }),
            Just(KernelSpec::Linear),
            (1u32..4, 0.0f64..2.0).prop_map(|(d, c)| KernelSpec::Polynomial { degree: d, offset: c }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn gram_symmetric_psd_consistent(spec in kernel_strategy(), seed in 0u64..1_000_000, n in 1usize..64, d in 1usize..4) {
            let x = random_data(seed, n, d);
            let k = gram_matrix(&spec, &x, &x).unwrap();
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(k[(i, j)].to_bits(), k[(j, i)].to_bits());
                    prop_assert_eq!(k[(i, j)].to_bits(), spec.eval_unchecked(x.row(i), x.row(j)).to_bits());
                }
            }
            let tr = crate::linalg::trace(k.as_ref());
            let eig = SymEigen::new(k.as_ref()).unwrap();
            prop_assert!(*eig.values.last().unwrap() >= -1e-10 * tr);
        }
    }
}

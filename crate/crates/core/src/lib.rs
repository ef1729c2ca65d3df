//! Kernel-based learning of evolution (Koopman / transfer) operators.
//!
//! The crate is organized around the pipeline
//! `datasets` → `estimators` → `spectral` → `metrics`:
//!
//! - [`kernels`]: kernel functions and Gram matrices, the implicit feature map.
//! - [`estimators`]: kernel ridge, PCR (kernel DMD), reduced-rank regression,
//!   randomized RRR and Nyström estimators, plus an explicit-feature primal oracle.
//! - [`spectral`]: eigenvalues, eigenfunctions, modes and forecasting.
//! - [`datasets`]: seeded benchmark systems and ground-truth spectra.
//! - [`metrics`]: spectral / eigenfunction errors, VAMP-2, forecast RMSE.
//! - [`io`]: trajectory and model file formats.

pub mod datasets;
pub mod error;
pub mod estimators;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use faer::{c64, Mat};
pub use kernels::{DataMatrix, KernelSpec};

//! Benchmark suites: eigenfunction accuracy of PCR vs RRR on quadruple-well
//! Langevin data, and fit time versus sample size on Lorenz-63 data.

use std::time::Instant;

use evolop_core::datasets::{langevin_truth, simulate, SystemSpec};
use evolop_core::estimators::{build_pairs, fit, EstimatorConfig, Method, NystromBase, SnapshotPair};
use evolop_core::kernels::{DataMatrix, KernelSpec};
use evolop_core::metrics::eigfn_error;
use evolop_core::spectral::{eig_decomposition, EigenSide};
use evolop_core::c64;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "suite", rename_all = "snake_case")]
pub enum BenchmarkConfig {
    EigfnAccuracy(EigfnAccuracyConfig),
    FitTime(FitTimeConfig),
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            BenchmarkConfig::EigfnAccuracy(c) => c.validate(),
            BenchmarkConfig::FitTime(c) => c.validate(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigfnAccuracyConfig {
    pub n: usize,
    pub seeds: Vec<u64>,
    pub beta: f64,
    pub dt: f64,
    pub stride: usize,
    pub lag: usize,
    pub x0: f64,
    pub lengthscale: f64,
    pub rank: usize,
    pub tikhonov: f64,
    /// Number of nontrivial eigenfunctions scored.
    pub eigenfunctions: usize,
    pub grid_points: usize,
}

impl Default for EigfnAccuracyConfig {
    fn default() -> Self {
        Self {
            n: 5000,
            seeds: (0..5).collect(),
            beta: 1.0,
            dt: 1e-4,
            stride: 100,
            lag: 1,
            x0: 0.0,
            lengthscale: 0.2,
            rank: 4,
            tikhonov: 1e-6,
            eigenfunctions: 3,
            grid_points: 1000,
        }
    }
}

impl EigfnAccuracyConfig {
    fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(CliError::config("eigfn_accuracy needs at least one seed"));
        }
        if self.eigenfunctions == 0 || self.rank <= self.eigenfunctions {
            return Err(CliError::config("rank must exceed the number of scored eigenfunctions"));
        }
        if self.lag == 0 {
            return Err(CliError::config("lag must be positive"));
        }
        SystemSpec::LangevinQuadWell { beta: self.beta, dt: self.dt, stride: self.stride }.validate()?;
        KernelSpec::Gaussian { lengthscale: self.lengthscale }.validate()?;
        Ok(())
    }

    pub fn lag_time(&self) -> f64 {
        self.dt * (self.stride * self.lag) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigfnRecord {
    pub estimator: String,
    pub seed: u64,
    pub eigenfunction: usize,
    pub eigfn_error: f64,
    pub eigenvalue: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigfnMedian {
    pub estimator: String,
    pub eigenfunction: usize,
    pub median: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigfnAccuracyResult {
    pub truth_eigenvalues: Vec<f64>,
    /// `|λ₁(points) − λ₁(2·points)|` of the reference grid.
    pub lambda1_drift: f64,
    pub records: Vec<EigfnRecord>,
    pub medians: Vec<EigfnMedian>,
    /// Grid, reference eigenfunctions and phase-aligned estimates of the first seed.
    #[serde(skip)]
    pub curves: Vec<(String, Vec<f64>)>,
}

impl EigfnAccuracyResult {
    pub fn median(&self, estimator: &str, eigenfunction: usize) -> Option<f64> {
        self.medians.iter().find(|m| m.estimator == estimator && m.eigenfunction == eigenfunction).map(|m| m.median)
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

// multiple of `est` closest to `truth` in the weighted norm
fn align(est: &[c64], truth: &[c64], w: &[f64]) -> Vec<f64> {
    let mut num = c64::new(0.0, 0.0);
    let mut den = 0.0;
    for i in 0..est.len() {
        num += est[i].conj() * truth[i] * w[i];
        den += est[i].norm_sqr() * w[i];
    }
    let a = if den > 0.0 { num / den } else { c64::new(0.0, 0.0) };
    est.iter().map(|v| (v * a).re).collect()
}

pub fn run_eigfn_accuracy(cfg: &EigfnAccuracyConfig) -> Result<EigfnAccuracyResult> {
    cfg.validate()?;
    let k = cfg.eigenfunctions + 1;
    let truth = langevin_truth(cfg.beta, cfg.lag_time(), -1.0, 1.0, cfg.grid_points, k)?;
    let fine = langevin_truth(cfg.beta, cfg.lag_time(), -1.0, 1.0, 2 * cfg.grid_points, k)?;
    let lambda1_drift = (truth.eigenvalues[1] - fine.eigenvalues[1]).norm();
    if !truth.converged {
        return Err(CliError::NotConverged(format!(
            "langevin reference with {} points moves λ₁ by {lambda1_drift:.2e} under doubling",
            cfg.grid_points
        )));
    }
    let grid = DataMatrix::new(truth.grid.len(), 1, truth.grid.clone())?;
    let kernel = KernelSpec::Gaussian { lengthscale: cfg.lengthscale };
    let spec = SystemSpec::LangevinQuadWell { beta: cfg.beta, dt: cfg.dt, stride: cfg.stride };
    let estimators = [("pcr", EstimatorConfig::pcr(cfg.rank, cfg.tikhonov)), ("rrr", EstimatorConfig::rrr(cfg.rank, cfg.tikhonov))];

    let mut curves = vec![("x".to_string(), truth.grid.clone())];
    for j in 1..k {
        let reference: Vec<f64> = truth.eigenfunction(j).iter().map(|v| v.re).collect();
        curves.push((format!("truth_{j}"), reference));
    }
    let mut records = Vec::new();
    for (s, &seed) in cfg.seeds.iter().enumerate() {
        let traj = simulate(&spec, &[cfg.x0], cfg.n + cfg.lag, seed).map_err(CliError::simulation)?;
        let pairs = build_pairs(&traj.values, cfg.lag)?;
        for (name, est) in &estimators {
            let start = Instant::now();
            let model = fit(est, &kernel, &pairs)?;
            let decomp = eig_decomposition(&model)?;
            if decomp.len() < k {
                return Err(CliError::Numerical(format!(
                    "{name} (seed {seed}) yields only {} eigenvalues, {k} needed",
                    decomp.len()
                )));
            }
            let psi = decomp.eval_eigenfunctions(&grid, EigenSide::Right)?;
            for j in 1..k {
                let est_j: Vec<c64> = (0..grid.nrows()).map(|i| psi[(i, j)]).collect();
                let truth_j = truth.eigenfunction(j);
                let err = eigfn_error(&est_j, &truth_j, &truth.invariant_density)?;
                let l = decomp.eigenvalues()[j];
                records.push(EigfnRecord {
                    estimator: name.to_string(),
                    seed,
                    eigenfunction: j,
                    eigfn_error: err,
                    eigenvalue: [l.re, l.im],
                });
                if s == 0 {
                    curves.push((format!("{name}_{j}"), align(&est_j, &truth_j, &truth.invariant_density)));
                }
            }
            log::info!("eigfn_accuracy: {name} seed {seed} done in {:.2?}", start.elapsed());
        }
    }

    let mut medians = Vec::new();
    for (name, _) in &estimators {
        for j in 1..k {
            let errs: Vec<f64> = records
                .iter()
                .filter(|r| r.estimator == *name && r.eigenfunction == j)
                .map(|r| r.eigfn_error)
                .collect();
            medians.push(EigfnMedian { estimator: name.to_string(), eigenfunction: j, median: median(&errs) });
        }
    }
    Ok(EigfnAccuracyResult {
        truth_eigenvalues: truth.eigenvalues.iter().map(|l| l.re).collect(),
        lambda1_drift,
        records,
        medians,
        curves,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedEstimator {
    pub label: String,
    pub estimator: EstimatorConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitTimeConfig {
    pub sizes: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    pub system: SystemSpec,
    pub x0: Vec<f64>,
    /// Rows discarded before the first snapshot pair.
    pub burn_in: usize,
    pub lengthscale: f64,
    pub estimators: Vec<TimedEstimator>,
}

impl Default for FitTimeConfig {
    fn default() -> Self {
        let rank = 10;
        let tikhonov = 1e-6;
        Self {
            sizes: vec![1000, 2000, 4000, 5000],
            repetitions: 3,
            seed: 0,
            system: SystemSpec::lorenz63(),
            x0: vec![1.0, 1.0, 1.0],
            burn_in: 1000,
            lengthscale: 5.0,
            estimators: vec![
                TimedEstimator { label: "rrr".into(), estimator: EstimatorConfig::rrr(rank, tikhonov) },
                TimedEstimator {
                    label: "rand_rrr".into(),
                    estimator: EstimatorConfig::new(
                        Method::RandRrr { rank, oversample: 10, power_iters: 1, seed: 0 },
                        tikhonov,
                    ),
                },
                TimedEstimator {
                    label: "nystrom_rrr".into(),
                    estimator: EstimatorConfig::new(
                        Method::Nystrom { base: NystromBase::Rrr, rank, inducing: 250, seed: 0 },
                        tikhonov,
                    ),
                },
            ],
        }
    }
}

impl FitTimeConfig {
    fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(CliError::config("fit_time sizes must be nonempty and positive"));
        }
        if self.repetitions == 0 {
            return Err(CliError::config("repetitions must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(CliError::config("fit_time needs at least one estimator"));
        }
        if self.x0.len() != self.system.state_dim() {
            return Err(CliError::config("fit_time x0 does not match the system dimension"));
        }
        self.system.validate()?;
        KernelSpec::Gaussian { lengthscale: self.lengthscale }.validate()?;
        for e in &self.estimators {
            e.estimator.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitTimeRecord {
    pub estimator: String,
    pub n: usize,
    pub seconds: Vec<f64>,
    pub median_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitTimeResult {
    pub records: Vec<FitTimeRecord>,
}

impl FitTimeResult {
    pub fn median(&self, estimator: &str, n: usize) -> Option<f64> {
        self.records.iter().find(|r| r.estimator == estimator && r.n == n).map(|r| r.median_seconds)
    }
}

/// Wall-clock time of one `fit` call, Gram assembly included.
pub fn time_fit(est: &EstimatorConfig, kernel: &KernelSpec, pairs: &SnapshotPair) -> Result<f64> {
    let start = Instant::now();
    let model = fit(est, kernel, pairs)?;
    let secs = start.elapsed().as_secs_f64();
    drop(model);
    Ok(secs)
}

pub fn run_fit_time(cfg: &FitTimeConfig) -> Result<FitTimeResult> {
    cfg.validate()?;
    let n_max = *cfg.sizes.iter().max().expect("nonempty");
    let traj = simulate(&cfg.system, &cfg.x0, cfg.burn_in + n_max + 1, cfg.seed).map_err(CliError::simulation)?;
    let kernel = KernelSpec::Gaussian { lengthscale: cfg.lengthscale };
    let mut records = Vec::new();
    for &n in &cfg.sizes {
        let window = traj.values.slice_rows(cfg.burn_in, cfg.burn_in + n + 1)?;
        let pairs = build_pairs(&window, 1)?;
        for t in &cfg.estimators {
            let mut seconds = Vec::with_capacity(cfg.repetitions);
            for _ in 0..cfg.repetitions {
                seconds.push(time_fit(&t.estimator, &kernel, &pairs)?);
            }
            let median_seconds = median(&seconds);
            log::info!("fit_time: {} n={n} median {median_seconds:.3}s", t.label);
            records.push(FitTimeRecord { estimator: t.label.clone(), n, seconds, median_seconds });
        }
    }
    Ok(FitTimeResult { records })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn suite_json_forms() {
        let b: BenchmarkConfig = serde_json::from_str(r#"{"suite": "fit_time", "sizes": [100], "repetitions": 1}"#).unwrap();
        match b {
            BenchmarkConfig::FitTime(c) => {
                assert_eq!(c.sizes, vec![100]);
                assert_eq!(c.estimators.len(), 3);
            }
            other => panic!("{other:?}"),
        }
        let b: BenchmarkConfig = serde_json::from_str(r#"{"suite": "eigfn_accuracy"}"#).unwrap();
        assert_eq!(b, BenchmarkConfig::EigfnAccuracy(EigfnAccuracyConfig::default()));
        assert!(serde_json::from_str::<BenchmarkConfig>(r#"{"suite": "speed"}"#).is_err());
    }

    #[test]
    fn fit_time_reports_one_record_per_pair() {
        let mut cfg = FitTimeConfig { sizes: vec![60, 120], repetitions: 3, burn_in: 10, ..Default::default() };
        for t in &mut cfg.estimators {
            if let Method::Nystrom { base, rank, seed, .. } = t.estimator.method {
                t.estimator.method = Method::Nystrom { base, rank, inducing: 30, seed };
            }
        }
        let r = run_fit_time(&cfg).unwrap();
        assert_eq!(r.records.len(), 6);
        for rec in &r.records {
            assert_eq!(rec.seconds.len(), 3);
            assert_eq!(rec.median_seconds, median(&rec.seconds));
        }
        assert!(r.median("rrr", 120).is_some());
    }
}

//! Experiment configuration files.
//!
//! One JSON document drives every command; each command reads the sections
//! it needs and reports a missing one as a configuration error. Unknown
//! fields are rejected everywhere.

use std::path::{Path, PathBuf};

use evolop_core::datasets::SystemSpec;
use evolop_core::estimators::EstimatorConfig;
use evolop_core::kernels::KernelSpec;
use evolop_core::spectral::ForecastMethod;
use serde::{Deserialize, Serialize};

use crate::bench::BenchmarkConfig;
use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorConfig>,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub paths: PathsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub spec: SystemSpec,
    /// Number of rows, including `x0`.
    pub length: usize,
    #[serde(default)]
    pub seed: u64,
    pub x0: Vec<f64>,
    #[serde(default = "default_lag")]
    pub lag: usize,
    #[serde(default)]
    pub format: TrajectoryFormat,
}

fn default_lag() -> usize {
    1
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryFormat {
    #[default]
    Csv,
    Binary,
}

impl TrajectoryFormat {
    pub fn file_name(self) -> &'static str {
        match self {
            TrajectoryFormat::Csv => "trajectory.csv",
            TrajectoryFormat::Binary => "trajectory.bin",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    SpectralError,
    EigfnError,
    ForecastRmse,
    Vamp2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Empty means every metric the command can compute.
    #[serde(default)]
    pub metrics: Vec<MetricName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruthSelector>,
    /// Evaluation grid for eigenfunction output (1-d systems).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub horizons: Vec<usize>,
    #[serde(default = "default_forecast_method")]
    pub forecast_method: ForecastMethod,
    /// Held-out trajectory generated from the dataset system.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<TestConfig>,
}

fn default_forecast_method() -> ForecastMethod {
    ForecastMethod::Spectral
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            metrics: Vec::new(),
            ground_truth: None,
            grid: None,
            horizons: Vec::new(),
            forecast_method: default_forecast_method(),
            test: None,
        }
    }
}

impl EvaluationConfig {
    pub fn wants(&self, m: MetricName) -> bool {
        self.metrics.is_empty() || self.metrics.contains(&m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points < 2 || !(self.lo < self.hi) {
            return Err(CliError::config("grid needs lo < hi and at least 2 points"));
        }
        let h = (self.hi - self.lo) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.lo + i as f64 * h).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    pub seed: u64,
    pub length: usize,
    pub x0: Vec<f64>,
}

/// Reference spectrum to score a model against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroundTruthSelector {
    NoisyLogistic {
        order: u32,
        #[serde(default = "default_truth_grid")]
        grid_points: usize,
    },
    Langevin {
        beta: f64,
        /// Defaults to `dt · stride · lag` of the dataset.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lag_time: Option<f64>,
        #[serde(default = "default_lo")]
        lo: f64,
        #[serde(default = "default_hi")]
        hi: f64,
        #[serde(default = "default_langevin_points")]
        points: usize,
        #[serde(default = "default_k")]
        k: usize,
    },
    /// Ulam discretization of the dataset system.
    Ulam {
        cells: usize,
        #[serde(default = "default_samples")]
        samples_per_cell: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_k")]
        k: usize,
    },
}

fn default_truth_grid() -> usize {
    512
}
fn default_lo() -> f64 {
    -1.0
}
fn default_hi() -> f64 {
    1.0
}
fn default_langevin_points() -> usize {
    1000
}
fn default_k() -> usize {
    4
}
fn default_samples() -> usize {
    1000
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Trajectory to fit; defaults to the generated file in the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<PathBuf>,
    /// Model file; defaults to `model.evolop` in the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// Held-out trajectory file for `forecast`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    /// CSV of evaluation points (header row, one column per state dimension).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(d) = &self.dataset {
            d.spec.validate()?;
            if d.length == 0 {
                return Err(CliError::config("dataset.length must be positive"));
            }
            if d.lag == 0 {
                return Err(CliError::config("dataset.lag must be positive"));
            }
            if d.x0.len() != d.spec.state_dim() {
                return Err(CliError::config(format!(
                    "dataset.x0 has {} entries, {} expects {}",
                    d.x0.len(),
                    d.spec.name(),
                    d.spec.state_dim()
                )));
            }
        }
        if let Some(k) = &self.kernel {
            k.validate()?;
        }
        if let Some(e) = &self.estimator {
            e.validate()?;
        }
        if self.evaluation.horizons.contains(&0) {
            return Err(CliError::config("horizons must be at least 1"));
        }
        if let Some(g) = &self.evaluation.grid {
            g.values()?;
        }
        if let Some(b) = &self.benchmark {
            b.validate()?;
        }
        Ok(())
    }

    pub fn dataset(&self) -> Result<&DatasetConfig> {
        self.dataset.as_ref().ok_or_else(|| CliError::config("config has no \"dataset\" section"))
    }

    pub fn kernel(&self) -> Result<&KernelSpec> {
        self.kernel.as_ref().ok_or_else(|| CliError::config("config has no \"kernel\" section"))
    }

    pub fn estimator(&self) -> Result<&EstimatorConfig> {
        self.estimator.as_ref().ok_or_else(|| CliError::config("config has no \"estimator\" section"))
    }

    pub fn benchmark(&self) -> Result<&BenchmarkConfig> {
        self.benchmark.as_ref().ok_or_else(|| CliError::config("config has no \"benchmark\" section"))
    }

    pub fn trajectory_path(&self, out: &Path) -> Result<PathBuf> {
        match &self.paths.trajectory {
            Some(p) => Ok(p.clone()),
            None => Ok(out.join(self.dataset()?.format.file_name())),
        }
    }

    pub fn model_path(&self, out: &Path) -> PathBuf {
        self.paths.model.clone().unwrap_or_else(|| out.join("model.evolop"))
    }

    /// The config with every default filled in, as recorded in result files.
    pub fn resolved(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"dataset": {"spec": {"system": "logistic_map", "r": 4.0}, "length": 10, "x0": [0.5]}}"#,
        )
        .unwrap();
        let d = cfg.dataset().unwrap();
        assert_eq!(d.lag, 1);
        assert_eq!(d.seed, 0);
        assert_eq!(d.format, TrajectoryFormat::Csv);
        assert_eq!(cfg.evaluation.forecast_method, ForecastMethod::Spectral);
        let v = cfg.resolved();
        assert_eq!(v["dataset"]["lag"], 1);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "{",
            r#"{"unknown": 1}"#,
            r#"{"dataset": {"spec": {"system": "logistic_map", "r": 4.0}, "length": 10, "x0": [0.5, 0.1]}}"#,
            r#"{"dataset": {"spec": {"system": "logistic_map", "r": 9.0}, "length": 10, "x0": [0.5]}}"#,
            r#"{"estimator": {"method": "rrr", "tikhonov": 1e-3}}"#,
            r#"{"evaluation": {"horizons": [0]}}"#,
            r#"{"evaluation": {"ground_truth": {"kind": "exact"}}}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn ground_truth_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"evaluation": {"ground_truth": {"kind": "langevin", "beta": 1.0}}}"#)
            .unwrap();
        match cfg.evaluation.ground_truth.unwrap() {
            GroundTruthSelector::Langevin { lag_time, lo, hi, points, k, .. } => {
                assert_eq!((lag_time, lo, hi, points, k), (None, -1.0, 1.0, 1000, 4));
            }
            other => panic!("{other:?}"),
        }
    }
}

//! The five subcommands. Each reads one [`ExperimentConfig`] and writes its
//! artifacts plus a JSON result carrying the resolved config.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use evolop_core::datasets::{
    langevin_truth, noisy_logistic_truth, simulate, ulam_truth, GroundTruthSpectrum, SystemSpec,
};
use evolop_core::estimators::{build_pairs, fit, FittedOperator};
use evolop_core::io::{load_model, save_model, trajectory_from_file_bytes, trajectory_to_bytes, trajectory_to_csv};
use evolop_core::metrics::{eigfn_error, forecast_rmse, spectral_error_report, vamp2_score, ModelForecaster, ScoreReport};
use evolop_core::spectral::{eig_decomposition, eigenfunctions_csv, EigenSide, SpectralDecomposition};
use evolop_core::{c64, DataMatrix};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bench::{run_eigfn_accuracy, run_fit_time, BenchmarkConfig, EigfnAccuracyResult, FitTimeResult};
use crate::config::{ExperimentConfig, GroundTruthSelector, MetricName, TrajectoryFormat};
use crate::error::{CliError, Result};

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text)
}

pub fn read_trajectory(path: &Path) -> Result<DataMatrix> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(trajectory_from_file_bytes(&bytes)?)
}

/// Points from a CSV with a header row and one column per state dimension.
pub fn read_points(path: &Path) -> Result<DataMatrix> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().skip(1).filter(|l| !l.trim().is_empty()).enumerate() {
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| CliError::config(format!("{}: row {i}: {e}", path.display())))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::config(format!("{}: no points", path.display())));
    }
    Ok(DataMatrix::from_rows(&rows)?)
}

fn load(path: &Path) -> Result<(FittedOperator, Value)> {
    if !path.exists() {
        return Err(CliError::config(format!("{}: model file not found", path.display())));
    }
    Ok(load_model(path)?)
}

pub fn generate(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let d = cfg.dataset()?;
    let traj = simulate(&d.spec, &d.x0, d.length, d.seed).map_err(CliError::simulation)?;
    let path = cfg.trajectory_path(out)?;
    match d.format {
        TrajectoryFormat::Csv => write_file(&path, trajectory_to_csv(&traj.values, traj.dt))?,
        TrajectoryFormat::Binary => write_file(&path, trajectory_to_bytes(&traj.values))?,
    }
    let manifest = json!({
        "command": "generate",
        "config": cfg.resolved(),
        "spec": d.spec,
        "seed": d.seed,
        "rows": traj.values.nrows(),
        "state_dim": traj.values.ncols(),
        "dt": traj.dt,
        "regimes": traj.regimes,
        "trajectory": path,
    });
    write_json(&out.join("generate_manifest.json"), &manifest)?;
    log::info!("wrote {} rows to {}", traj.values.nrows(), path.display());
    Ok(path)
}

fn lag_of(cfg: &ExperimentConfig) -> usize {
    cfg.dataset.as_ref().map_or(1, |d| d.lag)
}

pub fn fit_model(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let kernel = cfg.kernel()?;
    let est = cfg.estimator()?;
    let traj_path = cfg.trajectory_path(out)?;
    let traj = read_trajectory(&traj_path)?;
    let pairs = build_pairs(&traj, lag_of(cfg))?;

    let start = Instant::now();
    let model = fit(est, kernel, &pairs)?;
    let fit_seconds = start.elapsed().as_secs_f64();

    let provenance = json!({
        "trajectory": traj_path,
        "seed": cfg.dataset.as_ref().map(|d| d.seed),
        "config": cfg.resolved(),
    });
    let model_path = cfg.model_path(out);
    if let Some(parent) = model_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    save_model(&model_path, &model, &provenance)?;
    let manifest = json!({
        "command": "fit",
        "config": cfg.resolved(),
        "trajectory": traj_path,
        "model": model_path,
        "n_samples": model.n_samples(),
        "rank": model.rank(),
        "singular_values": model.singular_values(),
        "fit_seconds": fit_seconds,
    });
    write_json(&out.join("fit_manifest.json"), &manifest)?;
    log::info!("fitted {} in {fit_seconds:.3}s", est.method.name());
    Ok(model_path)
}

fn ground_truth(cfg: &ExperimentConfig, sel: &GroundTruthSelector, model: &FittedOperator) -> Result<GroundTruthSpectrum> {
    let truth = match sel {
        GroundTruthSelector::NoisyLogistic { order, grid_points } => noisy_logistic_truth(*order, *grid_points)?,
        GroundTruthSelector::Langevin { beta, lag_time, lo, hi, points, k } => {
            let lag_time = match lag_time {
                Some(t) => *t,
                None => match cfg.dataset.as_ref().map(|d| &d.spec) {
                    Some(SystemSpec::LangevinQuadWell { dt, stride, .. }) => dt * (stride * model.lag()) as f64,
                    _ => {
                        return Err(CliError::config(
                            "langevin ground truth needs lag_time or a langevin_quad_well dataset",
                        ))
                    }
                },
            };
            langevin_truth(*beta, lag_time, *lo, *hi, *points, *k)?
        }
        GroundTruthSelector::Ulam { cells, samples_per_cell, seed, k } => {
            ulam_truth(&cfg.dataset()?.spec, *cells, *samples_per_cell, *seed, *k)?
        }
    };
    if !truth.converged {
        return Err(CliError::NotConverged(format!("{:?} reference failed its refinement check", truth.provenance)));
    }
    Ok(truth)
}

/// Leading eigenvalues and eigenfunctions compared index by index; both lists
/// are sorted by modulus.
fn score_against_truth(
    cfg: &ExperimentConfig,
    decomp: &SpectralDecomposition<'_>,
    truth: &GroundTruthSpectrum,
) -> Result<Vec<ScoreReport>> {
    let mut scores = Vec::new();
    let s = decomp.len().min(truth.eigenvalues.len());
    if s == 0 {
        return Err(CliError::Numerical("model has no eigenvalues to score".into()));
    }
    if cfg.evaluation.wants(MetricName::SpectralError) {
        scores.push(spectral_error_report(&decomp.eigenvalues()[..s], &truth.eigenvalues[..s])?);
    }
    if cfg.evaluation.wants(MetricName::EigfnError) {
        if decomp.model().state_dim() != 1 {
            return Err(CliError::config("eigfn_error needs a one-dimensional state"));
        }
        let grid = DataMatrix::new(truth.grid.len(), 1, truth.grid.clone())?;
        let psi = decomp.eval_eigenfunctions(&grid, EigenSide::Right)?;
        let m = s.min(truth.eigenfunctions.ncols());
        let mut report = ScoreReport { metric: "eigfn_error".into(), value: 0.0, details: Default::default() };
        for j in 0..m {
            let est: Vec<c64> = (0..grid.nrows()).map(|i| psi[(i, j)]).collect();
            let err = eigfn_error(&est, &truth.eigenfunction(j), &truth.invariant_density)?;
            report.details.insert(format!("eigenfunction_{j}"), err);
            report.value += err / m as f64;
        }
        scores.push(report);
    }
    Ok(scores)
}

pub fn spectrum(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let model_path = cfg.model_path(out);
    let (model, provenance) = load(&model_path)?;
    let decomp = eig_decomposition(&model)?;
    ensure_dir(out)?;

    let grid = match (&cfg.paths.grid, &cfg.evaluation.grid) {
        (Some(p), _) => Some(read_points(p)?),
        (None, Some(g)) => {
            let v = g.values()?;
            if model.state_dim() != 1 {
                return Err(CliError::config("evaluation.grid is one-dimensional; use paths.grid for this model"));
            }
            Some(DataMatrix::new(v.len(), 1, v)?)
        }
        (None, None) => None,
    };
    let eigenfunctions = match &grid {
        Some(g) => {
            let path = out.join("eigenfunctions.csv");
            write_file(&path, eigenfunctions_csv(&decomp, g, EigenSide::Right)?)?;
            Some(path)
        }
        None => None,
    };

    let metrics = match &cfg.evaluation.ground_truth {
        Some(sel) => {
            let truth = ground_truth(cfg, sel, &model)?;
            json!({
                "reference_eigenvalues": truth.eigenvalues.iter().map(|l| [l.re, l.im]).collect::<Vec<_>>(),
                "scores": score_against_truth(cfg, &decomp, &truth)?,
            })
        }
        None => Value::Null,
    };

    let path = out.join("spectrum.json");
    write_json(
        &path,
        &json!({
            "command": "spectrum",
            "config": cfg.resolved(),
            "model": model_path,
            "model_provenance": provenance,
            "spectrum": decomp.report(),
            "eigenfunctions": eigenfunctions,
            "metrics": metrics,
        }),
    )?;
    Ok(path)
}

fn test_trajectory(cfg: &ExperimentConfig) -> Result<DataMatrix> {
    if let Some(p) = &cfg.paths.test {
        return read_trajectory(p);
    }
    let t = cfg
        .evaluation
        .test
        .as_ref()
        .ok_or_else(|| CliError::config("forecast needs paths.test or evaluation.test"))?;
    let spec = &cfg.dataset()?.spec;
    Ok(simulate(spec, &t.x0, t.length, t.seed).map_err(CliError::simulation)?.values)
}

/// Learned features `k(x, centers)·U` on lagged pairs of `test`.
fn vamp2_on(model: &FittedOperator, test: &DataMatrix, tikhonov: f64) -> Result<f64> {
    let pairs = build_pairs(test, model.lag())?;
    let fx = model.feature_gram(&pairs.x)? * model.u();
    let fy = model.feature_gram(&pairs.y)? * model.u();
    Ok(vamp2_score(fx.as_ref(), fy.as_ref(), model.rank(), tikhonov)?)
}

pub fn forecast(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let model_path = cfg.model_path(out);
    let (model, _) = load(&model_path)?;
    let test = test_trajectory(cfg)?;
    if test.ncols() != model.state_dim() {
        return Err(CliError::config(format!(
            "test trajectory has {} columns, model expects {}",
            test.ncols(),
            model.state_dim()
        )));
    }
    let horizons = if cfg.evaluation.horizons.is_empty() { vec![1] } else { cfg.evaluation.horizons.clone() };
    let mut scores = Vec::new();
    if cfg.evaluation.wants(MetricName::ForecastRmse) {
        let f_y = model.y_train().to_mat();
        let forecaster = ModelForecaster::new(&model, f_y.as_ref(), cfg.evaluation.forecast_method)?;
        scores.push(forecast_rmse(&forecaster, &test, None, &horizons)?);
    }
    if cfg.evaluation.wants(MetricName::Vamp2) {
        let value = vamp2_on(&model, &test, model.config().tikhonov)?;
        scores.push(ScoreReport { metric: "vamp2".into(), value, details: Default::default() });
    }
    let path = out.join("forecast.json");
    write_json(
        &path,
        &json!({
            "command": "forecast",
            "config": cfg.resolved(),
            "model": model_path,
            "test_rows": test.nrows(),
            "forecast_method": cfg.evaluation.forecast_method,
            "scores": scores,
        }),
    )?;
    Ok(path)
}

fn eigfn_csv(r: &EigfnAccuracyResult) -> String {
    let mut s = String::from("estimator,seed,eigenfunction,eigfn_error,eigenvalue_re,eigenvalue_im\n");
    for rec in &r.records {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            rec.estimator, rec.seed, rec.eigenfunction, rec.eigfn_error, rec.eigenvalue[0], rec.eigenvalue[1]
        ));
    }
    s
}

fn curves_csv(r: &EigfnAccuracyResult) -> String {
    let names: Vec<&str> = r.curves.iter().map(|(n, _)| n.as_str()).collect();
    let mut s = names.join(",");
    s.push('\n');
    let rows = r.curves.first().map_or(0, |(_, v)| v.len());
    for i in 0..rows {
        let cells: Vec<String> = r.curves.iter().map(|(_, v)| v[i].to_string()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn fit_time_csv(r: &FitTimeResult) -> String {
    let mut s = String::from("estimator,n,median_seconds,seconds\n");
    for rec in &r.records {
        let all: Vec<String> = rec.seconds.iter().map(f64::to_string).collect();
        s.push_str(&format!("{},{},{},{}\n", rec.estimator, rec.n, rec.median_seconds, all.join(";")));
    }
    s
}

pub fn benchmark(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    ensure_dir(out)?;
    match cfg.benchmark()? {
        BenchmarkConfig::EigfnAccuracy(b) => {
            let result = run_eigfn_accuracy(b)?;
            write_file(&out.join("eigfn_accuracy.csv"), eigfn_csv(&result))?;
            write_file(&out.join("eigfn_curves.csv"), curves_csv(&result))?;
            let path = out.join("eigfn_accuracy.json");
            write_json(&path, &json!({"command": "benchmark", "config": cfg.resolved(), "result": result}))?;
            Ok(path)
        }
        BenchmarkConfig::FitTime(b) => {
            let result = run_fit_time(b)?;
            write_file(&out.join("fit_time.csv"), fit_time_csv(&result))?;
            let path = out.join("fit_time.json");
            write_json(&path, &json!({"command": "benchmark", "config": cfg.resolved(), "result": result}))?;
            Ok(path)
        }
    }
}

//! Seeded benchmark systems and reference spectra.
//!
//! Every trajectory has `T` rows, the first being `x0`. Flows advance by one
//! integrator step of size `dt` per row (times `subsample`), maps by one
//! iteration. All randomness comes from [`crate::rng::seeded`].

mod noise;
mod truth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::DataMatrix;
use crate::rng::{self, Pcg64};

pub use noise::{normalization as noise_normalization, CosineNoise};
pub use truth::{
    gauss_legendre, langevin_truth, noisy_logistic_truth, quadwell_potential, quadwell_potential_derivative,
    ulam_transition_matrix, ulam_truth, GroundTruthSpectrum, Provenance,
};

const BLOW_UP: f64 = 1e12;

fn default_sigma() -> f64 {
    10.0
}
fn default_rho() -> f64 {
    28.0
}
fn default_beta() -> f64 {
    8.0 / 3.0
}
fn default_flow_dt() -> f64 {
    0.01
}
fn default_one() -> usize {
    1
}
fn default_alpha() -> f64 {
    -1.0
}
fn default_cubic() -> f64 {
    1.0
}
fn default_delta() -> f64 {
    0.3
}
fn default_force() -> f64 {
    0.3
}
fn default_omega() -> f64 {
    1.2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Lorenz63 {
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_flow_dt")]
        dt: f64,
        #[serde(default = "default_one")]
        subsample: usize,
    },
    /// `ẍ + δẋ + αx + βx³ = γ cos(ωt)` in the state `(x, ẋ, ωt mod 2π)`.
    Duffing {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_cubic")]
        beta: f64,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default = "default_force")]
        gamma: f64,
        #[serde(default = "default_omega")]
        omega: f64,
        #[serde(default = "default_flow_dt")]
        dt: f64,
        #[serde(default = "default_one")]
        subsample: usize,
    },
    LogisticMap {
        r: f64,
    },
    /// `x' = (4x(1 - x) + ξ) mod 1` with `ξ ~ C_N cosᴺ(πξ)`.
    NoisyLogisticMap {
        order: u32,
    },
    /// `x' = A x + σ ε`.
    LinearSystem {
        a: Vec<Vec<f64>>,
        #[serde(default)]
        noise_std: f64,
    },
    /// `x' = A_s x + σ ε` where the regime `s` is a Markov chain started in regime 0.
    RegimeSwitching {
        a_list: Vec<Vec<Vec<f64>>>,
        transition: Vec<Vec<f64>>,
        #[serde(default)]
        noise_std: f64,
        #[serde(default)]
        emit_regime: bool,
    },
    /// Euler–Maruyama for `dx = -V'(x) dt + √(2/β) dW` on `[-1, 1]`; steps leaving
    /// the interval are rejected. One row every `stride` steps.
    LangevinQuadWell {
        beta: f64,
        dt: f64,
        #[serde(default = "default_one")]
        stride: usize,
    },
}

impl SystemSpec {
    pub fn lorenz63() -> Self {
        SystemSpec::Lorenz63 { sigma: 10.0, rho: 28.0, beta: 8.0 / 3.0, dt: 0.01, subsample: 1 }
    }

    pub fn duffing() -> Self {
        SystemSpec::Duffing { alpha: -1.0, beta: 1.0, delta: 0.3, gamma: 0.3, omega: 1.2, dt: 0.01, subsample: 1 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SystemSpec::Lorenz63 { .. } => "lorenz63",
            SystemSpec::Duffing { .. } => "duffing",
            SystemSpec::LogisticMap { .. } => "logistic_map",
            SystemSpec::NoisyLogisticMap { .. } => "noisy_logistic_map",
            SystemSpec::LinearSystem { .. } => "linear_system",
            SystemSpec::RegimeSwitching { .. } => "regime_switching",
            SystemSpec::LangevinQuadWell { .. } => "langevin_quad_well",
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            SystemSpec::Lorenz63 { .. } | SystemSpec::Duffing { .. } => 3,
            SystemSpec::LogisticMap { .. }
            | SystemSpec::NoisyLogisticMap { .. }
            | SystemSpec::LangevinQuadWell { .. } => 1,
            SystemSpec::LinearSystem { a, .. } => a.len(),
            SystemSpec::RegimeSwitching { a_list, .. } => a_list.first().map_or(0, |a| a.len()),
        }
    }

    /// Step size in time units of one trajectory row, `None` for maps.
    pub fn time_step(&self) -> Option<f64> {
        match *self {
            SystemSpec::Lorenz63 { dt, subsample, .. } | SystemSpec::Duffing { dt, subsample, .. } => {
                Some(dt * subsample as f64)
            }
            SystemSpec::LangevinQuadWell { dt, stride, .. } => Some(dt * stride as f64),
            _ => None,
        }
    }

    pub fn is_map(&self) -> bool {
        matches!(self, SystemSpec::LogisticMap { .. } | SystemSpec::NoisyLogisticMap { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive, got {v}")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be nonnegative, got {v}")))
            }
        };
        let steps = |name: &str, v: usize| {
            if v >= 1 {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be at least 1")))
            }
        };
        match self {
            SystemSpec::Lorenz63 { sigma, rho, beta, dt, subsample } => {
                for (n, v) in [("sigma", sigma), ("rho", rho), ("beta", beta)] {
                    if !v.is_finite() {
                        return Err(Error::config(format!("{n} must be finite")));
                    }
                }
                positive("dt", *dt)?;
                steps("subsample", *subsample)
            }
            SystemSpec::Duffing { alpha, beta, delta, gamma, omega, dt, subsample } => {
                for (n, v) in [("alpha", alpha), ("beta", beta), ("delta", delta), ("gamma", gamma), ("omega", omega)] {
                    if !v.is_finite() {
                        return Err(Error::config(format!("{n} must be finite")));
                    }
                }
                positive("dt", *dt)?;
                steps("subsample", *subsample)
            }
            SystemSpec::LogisticMap { r } => {
                if (0.0..=4.0).contains(r) {
                    Ok(())
                } else {
                    Err(Error::config(format!("logistic parameter must lie in [0, 4], got {r}")))
                }
            }
            SystemSpec::NoisyLogisticMap { order } => CosineNoise::new(*order).map(|_| ()),
            SystemSpec::LinearSystem { a, noise_std } => {
                check_square(a, "a")?;
                nonneg("noise_std", *noise_std)
            }
            SystemSpec::RegimeSwitching { a_list, transition, noise_std, .. } => {
                if a_list.is_empty() {
                    return Err(Error::config("a_list must not be empty"));
                }
                let d = check_square(&a_list[0], "a_list[0]")?;
                for (i, a) in a_list.iter().enumerate() {
                    if check_square(a, "a_list")? != d {
                        return Err(Error::config(format!("a_list[{i}] has a different dimension")));
                    }
                }
                if transition.len() != a_list.len() {
                    return Err(Error::config("transition must have one row per regime"));
                }
                for (i, row) in transition.iter().enumerate() {
                    if row.len() != a_list.len() || row.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
                        return Err(Error::config(format!("transition row {i} is not a probability vector")));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > 1e-12 {
                        return Err(Error::config(format!("transition row {i} sums to {sum}, expected 1")));
                    }
                }
                nonneg("noise_std", *noise_std)
            }
            SystemSpec::LangevinQuadWell { beta, dt, stride } => {
                positive("beta", *beta)?;
                positive("dt", *dt)?;
                steps("stride", *stride)
            }
        }
    }
}

fn check_square(a: &[Vec<f64>], name: &str) -> Result<usize> {
    let d = a.len();
    if d == 0 || a.iter().any(|row| row.len() != d) {
        return Err(Error::config(format!("{name} must be a nonempty square matrix")));
    }
    if a.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::config(format!("{name} has non-finite entries")));
    }
    Ok(d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub values: DataMatrix,
    pub spec: SystemSpec,
    pub seed: u64,
    /// Time between rows, `None` for maps.
    pub dt: Option<f64>,
    /// Hidden regime per row, only for regime switching with `emit_regime`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regimes: Option<Vec<usize>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }
}

fn rk4<F: Fn(&[f64], &mut [f64])>(f: &F, x: &mut [f64], dt: f64) {
    let d = x.len();
    let mut k1 = vec![0.0; d];
    let mut k2 = vec![0.0; d];
    let mut k3 = vec![0.0; d];
    let mut k4 = vec![0.0; d];
    let mut tmp = vec![0.0; d];
    f(x, &mut k1);
    for i in 0..d {
        tmp[i] = x[i] + 0.5 * dt * k1[i];
    }
    f(&tmp, &mut k2);
    for i in 0..d {
        tmp[i] = x[i] + 0.5 * dt * k2[i];
    }
    f(&tmp, &mut k3);
    for i in 0..d {
        tmp[i] = x[i] + dt * k3[i];
    }
    f(&tmp, &mut k4);
    for i in 0..d {
        x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum()).collect()
}

fn categorical(rng: &mut Pcg64, probs: &[f64]) -> usize {
    let u = rng::uniform(rng);
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Simulates `t` rows starting from `x0`. Deterministic systems ignore `seed`.
pub fn simulate(spec: &SystemSpec, x0: &[f64], t: usize, seed: u64) -> Result<Trajectory> {
    spec.validate()?;
    if t == 0 {
        return Err(Error::config("trajectory length must be at least 1"));
    }
    let d = spec.state_dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.len() });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial state"));
    }
    if spec.is_map() && x0.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::config("map states must lie in [0, 1]"));
    }
    if matches!(spec, SystemSpec::LangevinQuadWell { .. }) && !(-1.0..=1.0).contains(&x0[0]) {
        return Err(Error::config("Langevin state must lie in [-1, 1]"));
    }

    let mut rng = rng::seeded(seed);
    let mut values = Vec::with_capacity(t * d);
    let mut regimes = Vec::new();
    let mut x = x0.to_vec();
    let mut regime = 0usize;
    values.extend_from_slice(&x);
    regimes.push(regime);

    let noise = match spec {
        SystemSpec::NoisyLogisticMap { order } => Some(CosineNoise::new(*order)?),
        _ => None,
    };

    for step in 1..t {
        match spec {
            &SystemSpec::Lorenz63 { sigma, rho, beta, dt, subsample } => {
                let f = |s: &[f64], out: &mut [f64]| {
                    out[0] = sigma * (s[1] - s[0]);
                    out[1] = s[0] * (rho - s[2]) - s[1];
                    out[2] = s[0] * s[1] - beta * s[2];
                };
                for _ in 0..subsample {
                    rk4(&f, &mut x, dt);
                }
            }
            &SystemSpec::Duffing { alpha, beta, delta, gamma, omega, dt, subsample } => {
                let f = |s: &[f64], out: &mut [f64]| {
                    out[0] = s[1];
                    out[1] = -delta * s[1] - alpha * s[0] - beta * s[0].powi(3) + gamma * s[2].cos();
                    out[2] = omega;
                };
                for _ in 0..subsample {
                    rk4(&f, &mut x, dt);
                    x[2] = x[2].rem_euclid(std::f64::consts::TAU);
                }
            }
            &SystemSpec::LogisticMap { r } => {
                x[0] = r * x[0] * (1.0 - x[0]);
            }
            SystemSpec::NoisyLogisticMap { .. } => {
                let xi = noise.as_ref().expect("noise sampler").sample(&mut rng);
                x[0] = (4.0 * x[0] * (1.0 - x[0]) + xi).rem_euclid(1.0);
            }
            SystemSpec::LinearSystem { a, noise_std } => {
                x = mat_vec(a, &x);
                if *noise_std > 0.0 {
                    for v in x.iter_mut() {
                        *v += noise_std * rng::normal(&mut rng);
                    }
                }
            }
            SystemSpec::RegimeSwitching { a_list, transition, noise_std, .. } => {
                x = mat_vec(&a_list[regime], &x);
                if *noise_std > 0.0 {
                    for v in x.iter_mut() {
                        *v += noise_std * rng::normal(&mut rng);
                    }
                }
                regime = categorical(&mut rng, &transition[regime]);
            }
            &SystemSpec::LangevinQuadWell { beta, dt, stride } => {
                let amp = (2.0 * dt / beta).sqrt();
                for _ in 0..stride {
                    let proposal = x[0] - quadwell_potential_derivative(x[0]) * dt + amp * rng::normal(&mut rng);
                    if (-1.0..=1.0).contains(&proposal) {
                        x[0] = proposal;
                    }
                }
            }
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP) {
            return Err(Error::BlowUp { step });
        }
        values.extend_from_slice(&x);
        regimes.push(regime);
    }

    let emit = matches!(spec, SystemSpec::RegimeSwitching { emit_regime: true, .. });
    Ok(Trajectory {
        values: DataMatrix::new(t, d, values)?,
        spec: spec.clone(),
        seed,
        dt: spec.time_step(),
        regimes: emit.then_some(regimes),
    })
}

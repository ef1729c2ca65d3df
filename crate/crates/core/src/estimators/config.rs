use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which reduced problem a Nyström estimator solves in inducing coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NystromBase {
    Pcr,
    Rrr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Ridge,
    Pcr { rank: usize },
    Rrr { rank: usize },
    RandRrr { rank: usize, oversample: usize, power_iters: usize, seed: u64 },
    Nystrom { base: NystromBase, rank: usize, inducing: usize, seed: u64 },
}

impl Method {
    pub fn rank(&self) -> Option<usize> {
        match *self {
            Method::Ridge => None,
            Method::Pcr { rank }
            | Method::Rrr { rank }
            | Method::RandRrr { rank, .. }
            | Method::Nystrom { rank, .. } => Some(rank),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Ridge => "ridge",
            Method::Pcr { .. } => "pcr",
            Method::Rrr { .. } => "rrr",
            Method::RandRrr { .. } => "rand_rrr",
            Method::Nystrom { base: NystromBase::Pcr, .. } => "nystrom_pcr",
            Method::Nystrom { base: NystromBase::Rrr, .. } => "nystrom_rrr",
        }
    }
}

/// Estimator choice plus Tikhonov regularization `γ ≥ 0`.
///
/// `γ = 0` is rejected at fit time when the system is singular, unless
/// `pseudo_inverse` is set, in which case a pseudo-inverse with cutoff
/// `1e-12 · trace` is used instead.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig", into = "RawConfig")]
pub struct EstimatorConfig {
    pub method: Method,
    pub tikhonov: f64,
    pub pseudo_inverse: bool,
}

impl EstimatorConfig {
    pub fn new(method: Method, tikhonov: f64) -> Self {
        Self { method, tikhonov, pseudo_inverse: false }
    }

    pub fn ridge(tikhonov: f64) -> Self {
        Self::new(Method::Ridge, tikhonov)
    }

    pub fn pcr(rank: usize, tikhonov: f64) -> Self {
        Self::new(Method::Pcr { rank }, tikhonov)
    }

    pub fn rrr(rank: usize, tikhonov: f64) -> Self {
        Self::new(Method::Rrr { rank }, tikhonov)
    }

    pub fn with_pseudo_inverse(mut self) -> Self {
        self.pseudo_inverse = true;
        self
    }

    /// Checks the invariants that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        if !(self.tikhonov >= 0.0 && self.tikhonov.is_finite()) {
            return Err(Error::config("tikhonov must be a nonnegative finite number"));
        }
        if let Some(r) = self.method.rank() {
            if r == 0 {
                return Err(Error::config("rank must be at least 1"));
            }
        }
        if let Method::Nystrom { rank, inducing, .. } = self.method {
            if inducing == 0 {
                return Err(Error::config("inducing must be at least 1"));
            }
            if rank > inducing {
                return Err(Error::config(format!("rank {rank} exceeds inducing points {inducing}")));
            }
        }
        Ok(())
    }

    /// Checks the invariants against a sample count `n`.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        self.validate()?;
        if let Some(r) = self.method.rank() {
            if r > n {
                return Err(Error::config(format!("rank {r} exceeds sample count {n}")));
            }
        }
        match self.method {
            Method::RandRrr { rank, oversample, .. } if rank + oversample > n => Err(Error::config(
                format!("rank + oversample = {} exceeds sample count {n}", rank + oversample),
            )),
            Method::Nystrom { inducing, .. } if inducing > n => {
                Err(Error::config(format!("inducing {inducing} exceeds sample count {n}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawConfig {
    method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rank: Option<usize>,
    tikhonov: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    oversample: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    power_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inducing: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pseudo_inverse: bool,
}

impl TryFrom<RawConfig> for EstimatorConfig {
    type Error = Error;
    fn try_from(raw: RawConfig) -> Result<Self> {
        let rank = || raw.rank.ok_or_else(|| Error::config(format!("method {:?} needs \"rank\"", raw.method)));
        let seed = raw.seed.unwrap_or(0);
        let method = match raw.method.as_str() {
            "ridge" => Method::Ridge,
            "pcr" => Method::Pcr { rank: rank()? },
            "rrr" => Method::Rrr { rank: rank()? },
            "rand_rrr" => Method::RandRrr {
                rank: rank()?,
                oversample: raw.oversample.unwrap_or(10),
                power_iters: raw.power_iters.unwrap_or(1),
                seed,
            },
            "nystrom_pcr" | "nystrom_rrr" => Method::Nystrom {
                base: if raw.method == "nystrom_pcr" { NystromBase::Pcr } else { NystromBase::Rrr },
                rank: rank()?,
                inducing: raw.inducing.ok_or_else(|| Error::config("nystrom methods need \"inducing\""))?,
                seed,
            },
            other => return Err(Error::config(format!("unknown estimator method {other:?}"))),
        };
        let cfg = EstimatorConfig { method, tikhonov: raw.tikhonov, pseudo_inverse: raw.pseudo_inverse };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<EstimatorConfig> for RawConfig {
    fn from(c: EstimatorConfig) -> Self {
        let mut raw = RawConfig {
            method: c.method.name().to_string(),
            rank: c.method.rank(),
            tikhonov: c.tikhonov,
            oversample: None,
            power_iters: None,
            inducing: None,
            seed: None,
            pseudo_inverse: c.pseudo_inverse,
        };
        match c.method {
            Method::RandRrr { oversample, power_iters, seed, .. } => {
                raw.oversample = Some(oversample);
                raw.power_iters = Some(power_iters);
                raw.seed = Some(seed);
            }
            Method::Nystrom { inducing, seed, .. } => {
                raw.inducing = Some(inducing);
                raw.seed = Some(seed);
            }
            _ => {}
        }
        raw
    }
}

//! Trigonometric noise with density `C_N cosᴺ(πξ)` on `[-1/2, 1/2]`.

use crate::error::{Error, Result};

const KNOTS: usize = 2048;

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Inverse-CDF sampler backed by a monotone cubic (PCHIP) spline over 2048 knots.
#[derive(Clone, Debug)]
pub struct CosineNoise {
    order: u32,
    // (N - 2k, coefficient) pairs of the antiderivative
    terms: Vec<(f64, f64)>,
    probs: Vec<f64>,
    points: Vec<f64>,
    slopes: Vec<f64>,
}

impl CosineNoise {
    pub fn new(order: u32) -> Result<Self> {
        if order % 2 != 0 {
            return Err(Error::config(format!("noise order must be even, got {order}")));
        }
        if order > 64 {
            return Err(Error::config(format!("noise order must be at most 64, got {order}")));
        }
        let c_n = normalization(order);
        let scale = c_n / 2f64.powi(order as i32);
        let terms = (0..order / 2)
            .map(|k| {
                let freq = (order - 2 * k) as f64;
                (freq, 2.0 * scale * binomial(order, k) / (freq * std::f64::consts::PI))
            })
            .collect();
        let mut noise = CosineNoise { order, terms, probs: Vec::new(), points: Vec::new(), slopes: Vec::new() };

        let mut probs: Vec<f64> = Vec::with_capacity(KNOTS);
        let mut points = Vec::with_capacity(KNOTS);
        for i in 0..KNOTS {
            let t = -0.5 + i as f64 / (KNOTS - 1) as f64;
            let p = noise.cdf(t);
            if let Some(&last) = probs.last() {
                if p <= last {
                    if i < KNOTS - 1 {
                        continue;
                    }
                    probs.pop();
                    points.pop();
                }
            }
            probs.push(p);
            points.push(t);
        }
        let slopes = pchip_slopes(&probs, &points);
        noise.probs = probs;
        noise.points = points;
        noise.slopes = slopes;
        Ok(noise)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn density(&self, t: f64) -> f64 {
        normalization(self.order) * (std::f64::consts::PI * t).cos().powi(self.order as i32)
    }

    /// `∫₀ᵗ` of the density, valid for every real `t` (the density is 1-periodic).
    pub fn antiderivative(&self, t: f64) -> f64 {
        let pi = std::f64::consts::PI;
        t + self.terms.iter().map(|&(f, c)| c * (f * pi * t).sin()).sum::<f64>()
    }

    pub fn cdf(&self, t: f64) -> f64 {
        (self.antiderivative(t.clamp(-0.5, 0.5)) + 0.5).clamp(0.0, 1.0)
    }

    /// Spline inverse of the CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let p = &self.probs;
        let i = match p.partition_point(|&v| v <= u) {
            0 => 0,
            k if k >= p.len() => p.len() - 2,
            k => k - 1,
        };
        let h = p[i + 1] - p[i];
        let s = (u - p[i]) / h;
        let (y0, y1) = (self.points[i], self.points[i + 1]);
        let (m0, m1) = (self.slopes[i], self.slopes[i + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * h * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * h * m1
    }

    pub fn sample(&self, rng: &mut crate::rng::Pcg64) -> f64 {
        self.quantile(crate::rng::uniform(rng))
    }
}

/// `C_N = 2ᴺ / binom(N, N/2)`.
pub fn normalization(order: u32) -> f64 {
    2f64.powi(order as i32) / binomial(order, order / 2)
}

// Fritsch–Carlson slopes for a monotone cubic Hermite interpolant.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let mut m = vec![0.0; n];
    if n == 2 {
        m[0] = delta[0];
        m[1] = delta[0];
        return m;
    }
    for i in 1..n - 1 {
        let (d0, d1) = (delta[i - 1], delta[i]);
        if d0 * d1 > 0.0 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let w1 = 2.0 * h1 + h0;
            let w2 = h1 + 2.0 * h0;
            m[i] = (w1 + w2) / (w1 / d0 + w2 / d1);
        }
    }
    m[0] = end_slope(x[1] - x[0], x[2] - x[1], delta[0], delta[1]);
    m[n - 1] = end_slope(x[n - 1] - x[n - 2], x[n - 2] - x[n - 3], delta[n - 2], delta[n - 3]);
    m
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

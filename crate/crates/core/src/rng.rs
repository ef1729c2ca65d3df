//! The single random number generator used throughout the crate.
//!
//! Every stochastic routine takes an explicit `u64` seed and draws from
//! [`Pcg64`] (PCG XSL-RR 128/64, fixed multiplier and increment) seeded via
//! [`SeedableRng::seed_from_u64`]. Normal variates use the ziggurat sampler of
//! `rand_distr`, uniform variates the 53-bit mantissa construction of `rand`.
//! None of these depend on platform floating-point behavior.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

pub use rand_pcg::Pcg64;

pub fn seeded(seed: u64) -> Pcg64 {
    Pcg64::seed_from_u64(seed)
}

#[inline]
pub fn normal(rng: &mut Pcg64) -> f64 {
    rng.sample(StandardNormal)
}

/// Uniform in `[0, 1)`.
#[inline]
pub fn uniform(rng: &mut Pcg64) -> f64 {
    rng.random::<f64>()
}

/// `k` distinct indices out of `0..n`, sorted ascending.
pub fn sample_without_replacement(rng: &mut Pcg64, n: usize, k: usize) -> Vec<usize> {
    assert!(k <= n);
    // partial Fisher-Yates
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let mut out = pool[..k].to_vec();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = seeded(7);
        let mut b = seeded(7);
        for _ in 0..100 {
            assert_eq!(normal(&mut a).to_bits(), normal(&mut b).to_bits());
        }
    }

    #[test]
    fn sampling_is_distinct_and_sorted() {
        let mut rng = seeded(3);
        let idx = sample_without_replacement(&mut rng, 50, 20);
        assert_eq!(idx.len(), 20);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(sample_without_replacement(&mut rng, 5, 5), vec![0, 1, 2, 3, 4]);
    }
}

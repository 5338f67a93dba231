use rand::Rng as _;

use crate::signal::rng_from_seed;

/// Glorot/Xavier uniform samples in `+-sqrt(6 / (fan_in + fan_out))`,
/// `fan_in * fan_out` of them.
pub fn xavier_init(fan_in: usize, fan_out: usize, seed: u64) -> Vec<f64> {
    xavier_samples(fan_in * fan_out, fan_in, fan_out, seed)
}

/// `count` samples from the Xavier law of the given fans. A depthwise kernel
/// of length `p` has fans `(p, p)` but only `p` weights.
pub(crate) fn xavier_samples(count: usize, fan_in: usize, fan_out: usize, seed: u64) -> Vec<f64> {
    let bound = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
    let mut rng = rng_from_seed(seed);
    (0..count).map(|_| rng.random_range(-bound..=bound)).collect()
}

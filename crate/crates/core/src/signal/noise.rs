use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::TimeSeries;

/// The crate-wide generator: ChaCha with 8 rounds, seeded through
/// `seed_from_u64`. Its output stream is fixed by the algorithm, so seeded
/// results are portable across platforms and builds.
pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives the seed of child stream `index` from `master` (one SplitMix64
/// step applied to `master + (index + 1) * golden_gamma`).
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `n` standard-normal samples drawn from the seeded generator.
pub fn white_noise(n: usize, seed: u64, fs: f64) -> TimeSeries {
    let mut rng = rng_from_seed(seed);
    let samples = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    TimeSeries::new(samples, fs).expect("normal samples are finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty() {
        assert!(white_noise(0, 7, 1.0).is_empty());
    }

    #[test]
    fn moments() {
        let ts = white_noise(1_000_000, 1, 1.0);
        assert!(ts.mean().abs() < 0.01);
        assert!((ts.variance() - 1.0).abs() < 0.01);
    }

    #[test]
    fn golden_reference() {
        // Frozen from the first run of the seeded generator.
        let expected = [
            0.47798123835102174,
            1.3340706102318078,
            -0.21086668327103028,
            0.4763469238088213,
        ];
        let ts = white_noise(4, 42, 1.0);
        assert_eq!(ts.samples(), &expected);
    }

    #[test]
    fn same_seed_same_stream() {
        assert_eq!(white_noise(64, 9, 1.0), white_noise(64, 9, 1.0));
        assert_ne!(white_noise(64, 9, 1.0), white_noise(64, 10, 1.0));
    }

    #[test]
    fn split_seed_spreads() {
        let a: Vec<u64> = (0..16).map(|i| split_seed(42, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), a.len());
        assert_eq!(split_seed(42, 3), split_seed(42, 3));
    }
}

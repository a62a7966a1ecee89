//! Seeded randomness helpers. Everything here is deterministic for a given
//! seed and independent of external RNG crate distribution internals, so
//! sampled outcomes stay stable across dependency upgrades.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream cipher RNG used everywhere a seed is accepted.
pub type Rng = ChaCha8Rng;

/// Build an RNG from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mix several seed components into one 64-bit seed (splitmix64 chain).
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h ^= splitmix64(p.wrapping_add(h));
        h = splitmix64(h);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform integer in `[0, n)` via rejection sampling (unbiased). `n` > 0.
pub fn uniform_below(rng: &mut Rng, n: u64) -> u64 {
    debug_assert!(n > 0);
    let zone = u64::MAX - (u64::MAX % n);
    loop {
        let x = rng.next_u64();
        if x < zone {
            return x % n;
        }
    }
}

/// Uniform float in `[0, 1)` with 53 bits of precision.
pub fn uniform_unit(rng: &mut Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Sample `n` distinct indices from `0..len` without replacement, returned in
/// ascending order. When `n >= len`, returns all indices.
pub fn sample_indices(rng: &mut Rng, len: usize, n: usize) -> Vec<usize> {
    if n >= len {
        return (0..len).collect();
    }
    // partial Fisher-Yates over an index vector, then sort the prefix
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..n {
        let j = i + uniform_below(rng, (len - i) as u64) as usize;
        idx.swap(i, j);
    }
    let mut picked = idx[..n].to_vec();
    picked.sort_unstable();
    picked
}

/// In-place Fisher-Yates shuffle.
pub fn shuffle<T>(rng: &mut Rng, xs: &mut [T]) {
    for i in (1..xs.len()).rev() {
        let j = uniform_below(rng, (i + 1) as u64) as usize;
        xs.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let a: Vec<u64> = (0..8).map(|_| rng_from_seed(7).next_u64()).collect();
        let b: Vec<u64> = (0..8).map(|_| rng_from_seed(7).next_u64()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_indices_without_replacement() {
        let mut rng = rng_from_seed(3);
        let picked = sample_indices(&mut rng, 100, 10);
        assert_eq!(picked.len(), 10);
        let mut dedup = picked.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), 10);
        assert!(picked.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sample_indices_full_range_is_identity() {
        let mut rng = rng_from_seed(3);
        assert_eq!(sample_indices(&mut rng, 4, 9), vec![0, 1, 2, 3]);
    }

    #[test]
    fn uniform_below_covers_range() {
        let mut rng = rng_from_seed(11);
        let mut seen = [false; 5];
        for _ in 0..200 {
            seen[uniform_below(&mut rng, 5) as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}

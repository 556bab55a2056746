//! Seeded random number generation.
//!
//! Every stochastic step in the toolkit draws from [`SeededRng`], a
//! xoshiro256++ generator whose 256-bit state is expanded from a `u64` seed
//! with SplitMix64. Both algorithms are fully specified integer arithmetic, so
//! streams are identical across platforms.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SeededRng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> SeededRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Derive an independent stream for a named sub-task (epoch shuffles,
/// parameter init, ...) so that adding draws in one place does not shift
/// another.
pub fn substream(seed: u64, tag: u64) -> SeededRng {
    // SplitMix64 finalizer over the pair.
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    seeded(z)
}

/// `min(k, n)` distinct indices from `0..n`, ascending.
pub fn sample_sorted(n: usize, k: usize, seed: u64, tag: u64) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    let mut v = rand::seq::index::sample(&mut substream(seed, tag), n, k).into_vec();
    v.sort_unstable();
    v
}

//! Deterministic seed derivation.
//!
//! Every random stream in a training run is keyed by a tuple of integers
//! (base seed, stream tag, iteration, state, action) folded through the
//! SplitMix64 finalizer. Parallel evaluation order therefore never changes
//! which numbers a given chain sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random number generator used throughout the crate.
pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into `base`, one SplitMix64 round per word.
pub fn mix(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(base), |acc, &p| {
        splitmix64(acc ^ p.wrapping_mul(GOLDEN))
    })
}

/// Stream tags keep independent uses of one base seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    QInit = 1,
    Support = 2,
    Chain = 3,
    Iid = 4,
}

pub fn derive(base: u64, stream: Stream, parts: &[u64]) -> u64 {
    let mut all = Vec::with_capacity(parts.len() + 1);
    all.push(stream as u64);
    all.extend_from_slice(parts);
    mix(base, &all)
}

pub fn rng_from(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

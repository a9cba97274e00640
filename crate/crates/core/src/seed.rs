//! Seed plumbing. Every random draw in the crate comes from a `ChaCha8Rng`
//! keyed by an explicit 64-bit seed; per-trial seeds are derived by mixing
//! `(master, index, purpose)` through SplitMix64 so that trials can run in any
//! order on any number of threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keep the β, design, noise and tie-break streams independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Labels = 0x6c61_6265_6c73,
    Design = 0x6465_7369_676e,
    Noise = 0x6e_6f69_7365,
    TieBreak = 0x7469_6573,
    Bootstrap = 0x626f_6f74,
    Simplex = 0x7369_6d70,
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, index: u64, purpose: Purpose) -> u64 {
    let a = splitmix64(master ^ (purpose as u64));
    let b = splitmix64(a ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    splitmix64(b ^ (purpose as u64).rotate_left(17))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

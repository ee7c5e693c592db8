//! Seeded random streams.
//!
//! Every random draw in the crate comes from [`ChaCha8Rng`], whose output
//! stream is fully specified by its seed, so instances and trials reproduce
//! bit-for-bit on any platform. Trial streams are keyed by a child seed that
//! is a SplitMix64 hash of `(master_seed, trial_index)`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

/// One SplitMix64 finalisation round.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `index` under `master_seed`.
pub fn child_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ index)
}

pub fn seeded(seed: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform double in `[0, 1)` built from the top 53 bits of one `u64`.
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in `lo..=hi` by rejection on one `u64` at a time.
pub fn uniform_int<R: RngCore + ?Sized>(rng: &mut R, lo: i64, hi: i64) -> i64 {
    debug_assert!(lo <= hi);
    let span = (hi - lo) as u64 + 1;
    // largest multiple of span that fits in u64
    let zone = u64::MAX - (u64::MAX % span) - 1;
    loop {
        let v = rng.next_u64();
        if v <= zone {
            return lo + (v % span) as i64;
        }
    }
}

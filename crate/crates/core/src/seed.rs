//! Deterministic seed derivation.
//!
//! Every random stream in a run (per-trial, per-chain, honest or
//! adversarial) is seeded by mixing a parent seed with a stream index
//! through the SplitMix64 finalizer. The golden-ratio increment
//! `0x9E37_79B9_7F4A_7C15` spreads consecutive indices across the state
//! space before finalization.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub const MIX_INCREMENT: u64 = 0x9E37_79B9_7F4A_7C15;

/// Derives the seed of child stream `index` from `base`.
pub fn mix(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(MIX_INCREMENT));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Stream indices used by the simulator.
pub(crate) mod stream {
    pub fn honest(chain: usize) -> u64 {
        2 * chain as u64
    }

    pub fn adversarial(chain: usize) -> u64 {
        2 * chain as u64 + 1
    }

    pub const TRANSACTIONS: u64 = u64::MAX - 1;
}

//! Seed derivation for replayable, independent random streams.
//!
//! Every chain owns a [`ChainRng`] seeded from `mix(base_seed, stream)`,
//! where `mix` is the SplitMix64 finalizer applied to
//! `base_seed + (stream + 1) * 0x9E3779B97F4A7C15`. Replica `r` of an
//! experiment uses `stream = r`; auxiliary streams (observation noise,
//! reference chains, shell sampling) use fixed tags from [`streams`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of stream `stream` under `base_seed`.
pub fn mix(base_seed: u64, stream: u64) -> u64 {
    splitmix64(base_seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn stream_rng(base_seed: u64, stream: u64) -> ChainRng {
    ChainRng::seed_from_u64(mix(base_seed, stream))
}

/// Reserved stream tags, kept far away from replica indices.
pub mod streams {
    pub const OBSERVATION_NOISE: u64 = 1 << 40;
    pub const REFERENCE_CHAIN: u64 = 1 << 41;
    pub const SHELL_SAMPLING: u64 = 1 << 42;
    pub const TEST_POINTS: u64 = 1 << 43;
}

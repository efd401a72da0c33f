//! Deterministic seed derivation.
//!
//! Every random decision in the crate draws from a `ChaCha8Rng` seeded through
//! `mix_seed`, so independent units of work (trees, nodes, partitions, arms)
//! get decorrelated streams that do not depend on scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64-style finalizer combining a base seed with a stream index.
pub(crate) fn mix_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// RNG for (`base`, `stream`); the workhorse behind tree/node/partition draws.
pub(crate) fn stream_rng(base: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(base, stream))
}

// Fixed stream salts so distinct roles never collide on the same stream id.
pub(crate) const SALT_SHUFFLE: u64 = 0x5348_5546; // partition-level shuffle
pub(crate) const SALT_SPLIT: u64 = 0x53_504C; // per-partition train/test split
pub(crate) const SALT_OUTCOME_FOREST: u64 = 0x594841_54; // nuisance outcome surface
pub(crate) const SALT_PROPENSITY_FOREST: u64 = 0x5748_4154; // nuisance propensity surface
pub(crate) const SALT_ARM: u64 = 0x41_524D; // per-arm model stream

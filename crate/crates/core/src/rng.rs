//! Seeded randomness.
//!
//! Every random stream is a ChaCha20 keystream (`rand_chacha::ChaCha20Rng`)
//! keyed by `seed_from_u64(seed)` and positioned on a 64-bit stream id.
//! Sub-seeds come from [`derive_seed`], a SplitMix64 finalizer applied to
//! `master + (index + 1) · 0x9E3779B97F4A7C15`, so any single restart, fold
//! or replicate can be reproduced in isolation from the master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Name recorded in dataset headers and reports.
pub const GENERATOR: &str = "ChaCha20 (rand_chacha 0.9, seed_from_u64, stream = cell index)";

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 of `master` advanced `index + 1` steps.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, stream_id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Namespaces for [`derive_seed`] indices so different consumers of one
/// master seed never collide.
pub(crate) mod domain {
    pub const RESTART: u64 = 0;
    pub const FOLDS: u64 = 1 << 40;
    pub const SPLIT: u64 = 2 << 40;
    pub const NULL_FIT: u64 = 3 << 40;
    pub const ALT_FIT: u64 = 4 << 40;
    pub const FOLD_FIT: u64 = 5 << 40;
}

//! Seed handling.
//!
//! Every stochastic component takes an explicit `u64` seed. Child seeds are
//! derived from a master seed with a counter-based SplitMix64 mix, so the
//! seed of sweep member `k` depends only on `(master, stream, k)` and never on
//! scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Well-known stream identifiers used by the estimator and the experiment runner.
pub mod stream {
    pub const CONTROL_PIPELINE: u64 = 0;
    pub const TREATMENT_PIPELINE: u64 = 1;
    pub const PROPENSITY: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const GENERATOR: u64 = 4;
    pub const SWEEP_CONTROL: u64 = 5;
    pub const SWEEP_TREATMENT: u64 = 6;
    pub const AUXILIARIES: u64 = 7;
    pub const HYPERPARAMS: u64 = 8;
    pub const RETRY: u64 = 9;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of item `index` in `stream` from `master`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(b ^ index.wrapping_mul(0xA076_1D64_78BD_642F))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

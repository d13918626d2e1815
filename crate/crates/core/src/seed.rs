//! Deterministic seed derivation.
//!
//! Every random decision in a run draws from its own stream, derived from the
//! experiment seed, a stream tag, and the iteration number. Streams keep the
//! phases independent: adding a deletion step never perturbs the random state
//! used for addition, which is what makes an AAL run with `n_delete = 0`
//! bit-identical to a plain AL run.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_POOL_INIT: u64 = 1;
pub const STREAM_DATASET: u64 = 2;
pub const STREAM_FIT: u64 = 3;
pub const STREAM_SELECT_ADD: u64 = 4;
pub const STREAM_SELECT_DELETE: u64 = 5;
pub const STREAM_RANDOM_POLICY: u64 = 6;

/// Mix a base seed, stream tag, and step into a well-spread 64-bit seed
/// (splitmix64 finalizer).
pub fn mix_seed(base: u64, stream: u64, step: u64) -> u64 {
    let mut z = base
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ step.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded generator for one derived stream. ChaCha8 is stable across
/// platforms and releases, so logs reproduce anywhere.
pub fn rng_for(base: u64, stream: u64, step: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(base, stream, step))
}

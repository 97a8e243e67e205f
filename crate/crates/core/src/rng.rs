//! Seeded random substreams.
//!
//! Every stochastic decision in the toolkit draws from a ChaCha8 stream keyed
//! by a base seed plus a path of integer tags (component, epoch, index, ...).
//! Streams are therefore reproducible from counters alone, which keeps
//! checkpoints free of opaque generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags for the independent consumers of randomness.
pub mod tag {
    pub const SEGMENTER_INIT: u64 = 1;
    pub const DISCRIMINATOR_INIT: u64 = 2;
    pub const EPOCH_ORDER: u64 = 3;
    pub const SAMPLE_AUG: u64 = 4;
    pub const DISC_AUG: u64 = 5;
    pub const SPLIT: u64 = 6;
    pub const TILE: u64 = 7;
    pub const SOURCE_STREAM: u64 = 8;
    pub const TARGET_STREAM: u64 = 9;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a base seed and a tag path into a single 64-bit key.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

/// Independent generator for `(seed, tags...)`.
pub fn substream(seed: u64, tags: &[u64]) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tags))
}

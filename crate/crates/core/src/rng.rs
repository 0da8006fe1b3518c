//! Seeded random streams.
//!
//! Every stochastic step in the crate draws from [`ChaCha8Rng`], a counter-based
//! generator whose output for a given `(seed, stream)` is fixed by the
//! `rand_chacha` crate. Independent consumers of one seed use distinct stream ids.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as LabRng;

pub fn seeded(seed: u64) -> LabRng {
    LabRng::seed_from_u64(seed)
}

pub fn stream(seed: u64, stream_id: u64) -> LabRng {
    let mut rng = LabRng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Mix a base seed with a label so derived seeds don't collide.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

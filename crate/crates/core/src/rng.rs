//! Counter-style seed derivation.
//!
//! Every random draw in the crate comes from a ChaCha8 stream whose key is a
//! pure function of `(master seed, purpose tag, indices)`, so results never
//! depend on which thread ran which cell or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed, a purpose tag and a list of indices into a sub-seed.
pub fn derive_seed(master: u64, tag: &str, indices: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    for byte in tag.bytes() {
        h = splitmix64(h ^ u64::from(byte));
    }
    // Separate the tag from the indices so ("ab", [1]) and ("a", [b'b', 1]) differ.
    h = splitmix64(h ^ 0xFF);
    for &i in indices {
        h = splitmix64(h ^ i);
    }
    h
}

/// Generator for the stream identified by `(master, tag, indices)`.
pub fn stream(master: u64, tag: &str, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tag, indices))
}

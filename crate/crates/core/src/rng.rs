//! Counter-based seeding.
//!
//! Every random stream is identified by the master seed plus a short tuple of
//! indices (replica, path within the replica, ...). The tuple is hashed into a
//! fresh ChaCha seed, so a stream never depends on how many other streams were
//! drawn before it or on which thread drew them.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a stream address into a 64-bit seed.
pub fn derive_seed(master: u64, address: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    for (i, a) in address.iter().enumerate() {
        h = splitmix64(h ^ splitmix64(a.wrapping_add((i as u64 + 1) << 56)));
    }
    h
}

/// Generator for the stream at `address` under `master`.
pub fn stream(master: u64, address: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, address))
}

//! Seed derivation.
//!
//! Every random quantity is drawn from a [`SimRng`] created from a `u64` seed.
//! Child seeds are derived from a parent seed and a stream label with
//! [`derive_seed`], so the streams used by one experiment are:
//!
//! * trial `i`: `derive_seed(master, i)`
//! * inside a trial: dataset draw on [`DATASET_STREAM`], analyst coins on
//!   [`COIN_STREAM`], mechanism noise for round `r` (0-based) on
//!   [`round_stream`]`(r)`.
//!
//! The analyst derives one child of its coin seed per round, see
//! [`crate::analysts`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const DATASET_STREAM: u64 = 0;
pub const COIN_STREAM: u64 = 1;

pub fn round_stream(round: usize) -> u64 {
    2 + round as u64
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `stream` under `parent`.
pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    splitmix64(parent ^ splitmix64(stream.wrapping_add(0x6A09_E667_F3BC_C909)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn child_rng(parent: u64, stream: u64) -> SimRng {
    rng_from_seed(derive_seed(parent, stream))
}

//! Seed derivation. Every shot owns a ChaCha stream keyed by `(master_seed,
//! shot_index)`, so a batch gives the same records on any number of threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Streams at or above this value are reserved for non-shot consumers.
const AUX_STREAM_BASE: u64 = 1 << 63;

/// Stream used for majority-vote tie breaking during up-sampling.
pub const TIE_BREAK_STREAM: u64 = 1;

pub fn shot_rng(master_seed: u64, shot_index: u64) -> SimRng {
    debug_assert!(shot_index < AUX_STREAM_BASE);
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(shot_index);
    rng
}

pub fn aux_rng(master_seed: u64, tag: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(AUX_STREAM_BASE | tag);
    rng
}

/// Deterministic child seed for one labeled batch (splitmix64 chain).
pub fn derive_seed(master_seed: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(master_seed), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

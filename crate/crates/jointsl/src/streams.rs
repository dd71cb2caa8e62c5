//! Deterministic random-number streams.
//!
//! Every stochastic task in the crate (a subject's simulation, one model fit,
//! one prediction chain) owns a private ChaCha generator derived from the
//! user-facing seed plus a list of integer tags identifying the task. The
//! derivation is a SplitMix64-style expansion, so streams with different tags
//! are statistically independent and byte-identical across runs, platforms,
//! and thread schedules.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// SplitMix64 step: advances the state and returns the next mixed output.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent generator from `(seed, tags)`.
///
/// The seed and each tag are absorbed into a SplitMix64 state; the expanded
/// outputs key a ChaCha12 generator. Identical inputs always produce an
/// identical stream; changing any tag decorrelates the stream completely.
pub fn stream(seed: u64, tags: &[u64]) -> ChaCha12Rng {
    let mut state = seed ^ 0x6a09_e667_f3bc_c908;
    let mut absorbed = splitmix64(&mut state);
    for &t in tags {
        state ^= t.wrapping_mul(0x2545_f491_4f6c_dd1d);
        absorbed ^= splitmix64(&mut state).rotate_left(17);
    }
    state ^= absorbed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

/// FNV-1a 64-bit hash, used to key per-subject streams by opaque id.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Stable tag constants for the major pipeline stages.
pub mod tags {
    pub const SIMULATE: u64 = 0x01;
    pub const CENSOR: u64 = 0x02;
    pub const TUNE: u64 = 0x03;
    pub const FOLDS: u64 = 0x04;
    pub const FIT: u64 = 0x05;
    pub const PREDICT: u64 = 0x06;
    pub const REPLICATE: u64 = 0x07;
    pub const COVARIATE: u64 = 0x08;
}

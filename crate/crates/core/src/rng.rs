//! Seeded randomness.
//!
//! Every random object in the crate is drawn from a ChaCha8 stream keyed by
//! a 64-bit seed. Independent purposes (sign flips, sampling, hashing, each
//! Gaussian column) use distinct stream ids of the same key, so realizing a
//! larger object never perturbs the entries of a smaller one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type StreamRng = ChaCha8Rng;

pub(crate) const STREAM_SIGNS: u64 = 1;
pub(crate) const STREAM_SAMPLE: u64 = 2;
pub(crate) const STREAM_HASH: u64 = 3;
const STREAM_COLUMN_BASE: u64 = 1 << 32;

/// Generator for stream `stream` of key `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator dedicated to column `col` of a seeded Gaussian block.
pub fn column_rng(seed: u64, col: usize) -> StreamRng {
    stream_rng(seed, STREAM_COLUMN_BASE + col as u64)
}

/// Fills `out` with standard normal draws from column stream `col`.
pub fn fill_normal_column(seed: u64, col: usize, out: &mut [f64]) {
    let mut rng = column_rng(seed, col);
    for v in out.iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }
}

/// Seed of Monte-Carlo trial `trial` under base seed `seed`.
///
/// Trials are independent of evaluation order.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ trial as u64
}

/// Derives a sub-seed from a base seed and a text label (FNV-1a of the
/// label, mixed with the seed through a SplitMix64 finalizer).
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(seed ^ h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

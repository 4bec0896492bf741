//! Seed derivation and counter-based substreams.
//!
//! Every random object draws from a ChaCha8 stream keyed by a derived seed
//! and a stream index (matrix row, sample index, ...), so generation order
//! and thread count never change the values.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Child seed for `(parent, tag)` using the SplitMix64 finalizer.
pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    let mut z = parent ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fills `out` with `N(0, std²)` draws from one substream.
pub fn fill_normal(out: &mut [f64], seed: u64, stream: u64, std: f64) {
    let mut rng = stream_rng(seed, stream);
    for v in out {
        let g: f64 = StandardNormal.sample(&mut rng);
        *v = std * g;
    }
}

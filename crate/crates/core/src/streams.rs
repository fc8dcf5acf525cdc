//! Counter-based per-replicate random number streams.
//!
//! Monte Carlo campaigns must produce bit-identical results whatever the
//! thread count. We therefore never share a generator across replicates:
//! replicate `i` of a campaign keyed by `master_seed` gets its own ChaCha12
//! generator whose 256-bit key is expanded from `master_seed` and whose
//! 64-bit stream counter is `i`. Distinct stream counters yield independent
//! keystreams by construction, so there is no skip-ahead bookkeeping and no
//! ordering constraint between replicates.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Stride reserving a block of stream ids per experiment arm, so that one
/// master seed can drive several related campaigns (e.g. a grid of
/// population sizes) without stream collisions: arm `a`, replicate `i` uses
/// stream `a * REPLICATE_STRIDE + i`.
pub const REPLICATE_STRIDE: u64 = 1 << 32;

/// Generator for one replicate of a campaign.
pub fn replicate_rng(master_seed: u64, replicate: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::from_seed(expand_key(master_seed));
    rng.set_stream(replicate);
    rng
}

/// SplitMix64 expansion of the master seed into a 256-bit ChaCha key.
fn expand_key(master_seed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    let mut state = master_seed;
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    key
}

//! Deterministic substream derivation shared by the Monte-Carlo engines.
//!
//! Every randomized engine in this crate derives one ChaCha stream per unit
//! of work from `(seed, stream)`. Results are therefore a pure function of
//! the seed and the work partition, independent of thread count or
//! scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) fn substream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives an independent sub-seed, used when one engine needs to hand a
/// whole seed (not just a stream) to another engine.
pub(crate) fn derive_seed(seed: u64, salt: u64) -> u64 {
    use rand::RngCore;
    substream_rng(seed, salt ^ 0x5eed_5a17).next_u64()
}

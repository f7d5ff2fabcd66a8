//! Deterministic RNG streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for the `index`-th independent stream under `seed`.
///
/// Streams are separated with ChaCha's stream counter, so results do not
/// depend on which thread happens to draw which stream.
pub(crate) fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

pub(crate) const DOMAIN_PHASE: u64 = 1;
pub(crate) const DOMAIN_SAMPLES: u64 = 2;
pub(crate) const DOMAIN_BOOTSTRAP: u64 = 3;

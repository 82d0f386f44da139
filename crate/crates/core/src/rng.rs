//! Named random sub-streams derived from a single user seed.
//!
//! Every consumer of randomness gets its own ChaCha stream so that adding a
//! draw in one place never shifts the numbers seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Synthesis = 1,
    Init = 2,
    Trial = 3,
}

/// Stream `index` of kind `kind` for `seed`. For [`Stream::Init`] the index
/// is the restart count (0 for the first initialization).
pub fn substream(seed: u64, kind: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((kind as u64) << 48) | (index & 0xffff_ffff_ffff));
    rng
}

/// Derives a child seed, e.g. one per sweep trial.
pub fn child_seed(seed: u64, kind: Stream, index: u64) -> u64 {
    use rand::RngCore;
    substream(seed, kind, index).next_u64()
}

//! Deterministic random streams derived from a single master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent sub-streams of one training run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Env = 2,
    Action = 3,
    Fractions = 4,
    Replay = 5,
    Eval = 6,
}

/// Returns the generator for `stream` under `master_seed`.
///
/// Streams share the key and differ only in the ChaCha stream id, so they
/// never overlap and their order of use does not matter.
pub fn stream(master_seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream as u64);
    rng
}

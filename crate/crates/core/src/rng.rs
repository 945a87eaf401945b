//! Named random streams derived from one scenario seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stream {
    World = 1,
    Tasks = 2,
    Dispatch = 3,
    Answers = 4,
    Cluster = 5,
}

/// Independent ChaCha stream for one purpose, so changing how one part of a
/// run consumes randomness leaves the others untouched.
pub(crate) fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

//! Seeded random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate. Portable and reproducible.
pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Independent stream `stream` under `root`; a pure function of both.
pub fn substream(root: u64, stream: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(root);
    rng.set_stream(stream);
    rng
}

//! Seeded random streams.
//!
//! Every run owns a ChaCha8 stream keyed by `(master seed, stream index)`,
//! so parallel runs never share state and their outputs do not depend on
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn stream_rng(master_seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

//! Seeded random streams.
//!
//! Every random quantity comes from ChaCha20 (a 64-bit-counter block cipher
//! generator) keyed by `seed_from_u64(seed)`; distinct purposes use distinct
//! stream ids so that, for example, changing the masking probability never
//! perturbs the simulated latent positions.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Simulate = 2,
    Mask = 3,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

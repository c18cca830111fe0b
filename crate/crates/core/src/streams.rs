//! Independent random streams derived from one experiment seed.
//!
//! Each stage of an experiment draws from its own stream so that changing
//! one stage (the network, the number of islands) never shifts the numbers
//! another stage sees.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Initial population generation.
pub const SEEDING: u64 = 1;
/// Frame loss on the simulated link.
pub const LINK: u64 = 2;
/// Island GA seeds: `ISLANDS + island id`.
pub const ISLANDS: u64 = 1 << 16;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// GA seed of island `id`. A centralized run uses island 1.
pub fn island_seed(seed: u64, id: u8) -> u64 {
    stream(seed, ISLANDS + id as u64).next_u64()
}

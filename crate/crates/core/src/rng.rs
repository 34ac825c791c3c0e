//! Deterministic RNG streams.
//!
//! Every randomized operation takes a `u64` seed. Independent sub-tasks
//! (trials, restarts, per-trial components) get their own ChaCha stream
//! derived from the parent seed by counter, so results do not depend on
//! scheduling order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for sub-task `counter` of the task seeded with `seed`.
pub fn derive_seed(seed: u64, counter: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(counter.wrapping_add(1));
    rng.next_u64()
}

/// Seed for a named component (`label`) of sub-task `counter`.
pub fn derive_labeled(seed: u64, counter: u64, label: u64) -> u64 {
    derive_seed(derive_seed(seed, counter), label)
}

//! Seeded random streams.
//!
//! Every experiment draws from ChaCha20 (a counter-based generator); trial `t`
//! of a run with seed `s` uses the substream seeded by `s ^ t`.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type ExperimentRng = ChaCha20Rng;

pub fn stream(seed: u64) -> ExperimentRng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn substream(seed: u64, trial: u64) -> ExperimentRng {
    ChaCha20Rng::seed_from_u64(seed ^ trial)
}

/// A fresh seed for runs that were not given one; callers record it.
pub fn fresh_seed() -> u64 {
    rand::random()
}

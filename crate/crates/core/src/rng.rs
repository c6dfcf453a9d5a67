//! Seeded random streams.
//!
//! Each run owns one seed; every consumer of randomness (environment noise,
//! action sampling, minibatch shuffling, Fisher rollouts, replay sampling,
//! weight initialisation) draws from its own ChaCha stream keyed by
//! `(seed, purpose)`. Streams are independent of each other, so adding or
//! removing draws in one place never perturbs another.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RunSeed(pub u64);

impl std::fmt::Display for RunSeed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Init,
    Environment,
    Policy,
    Shuffle,
    Fisher,
    Replay,
    Evaluation,
}

impl Purpose {
    fn stream_id(self) -> u64 {
        match self {
            Purpose::Init => 1,
            Purpose::Environment => 2,
            Purpose::Policy => 3,
            Purpose::Shuffle => 4,
            Purpose::Fisher => 5,
            Purpose::Replay => 6,
            Purpose::Evaluation => 7,
        }
    }
}

impl RunSeed {
    pub fn stream(self, purpose: Purpose) -> Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(purpose.stream_id());
        rng
    }
}

/// Standard normal draw.
pub fn normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

pub fn index(rng: &mut Rng, len: usize) -> usize {
    rng.random_range(0..len)
}

/// In-place Fisher-Yates shuffle.
pub fn shuffle<T>(rng: &mut Rng, items: &mut [T]) {
    use rand::seq::SliceRandom;
    items.shuffle(rng);
}

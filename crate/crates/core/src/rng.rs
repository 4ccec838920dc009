//! Named random substreams derived from a single root seed.
//!
//! Every consumer of randomness in a run owns its own ChaCha stream, so adding
//! draws to one consumer never shifts the numbers seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Init = 1,
    Env = 2,
    EvalEnv = 3,
    Exploration = 4,
    TargetNoise = 5,
    Replay = 6,
    Beta = 7,
    BiasProbe = 8,
    Oracle = 9,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    seed: u64,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, stream: Stream) -> Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream as u64);
        rng
    }

    /// Derive a 64-bit seed for a sub-component (e.g. an environment that reseeds itself).
    pub fn derived_seed(&self, stream: Stream) -> u64 {
        use rand::RngCore;
        self.stream(stream).next_u64()
    }
}

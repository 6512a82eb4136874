//! Named, splittable seed streams.
//!
//! Every random component of an experiment draws from its own generator,
//! seeded from `(master seed, path of names and indices)`. Adding a new
//! consumer never perturbs the draws of an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedStream {
    state: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

impl SeedStream {
    pub fn new(master_seed: u64) -> Self {
        Self {
            state: splitmix64(master_seed),
        }
    }

    /// Child stream for a named component.
    pub fn named(&self, name: &str) -> Self {
        Self {
            state: splitmix64(self.state ^ fnv1a(name.as_bytes())),
        }
    }

    /// Child stream for an indexed component (client, round, ...).
    pub fn indexed(&self, index: u64) -> Self {
        Self {
            state: splitmix64(self.state.rotate_left(17) ^ splitmix64(index)),
        }
    }

    pub fn seed(&self) -> u64 {
        self.state
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.state)
    }
}

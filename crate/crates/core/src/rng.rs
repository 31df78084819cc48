//! Seeded randomness.
//!
//! Every stochastic routine takes a [`RandomSource`] explicitly. The generator
//! is ChaCha8 (counter based, portable across platforms). Named sub-streams
//! are derived from a parent seed as
//!
//! ```text
//! child_seed = splitmix64(parent_seed ^ fnv1a64(label) ^ splitmix64(index))
//! ```
//!
//! so that e.g. the data, fold, optimizer-start and MCMC streams of a run can
//! be replayed independently from one master seed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for a named purpose. Does not consume state.
    pub fn derive(&self, label: &str) -> RandomSource {
        self.derive_indexed(label, 0)
    }

    /// Independent stream for the `index`-th member of a named family.
    pub fn derive_indexed(&self, label: &str, index: u64) -> RandomSource {
        RandomSource::new(splitmix64(self.seed ^ fnv1a64(label) ^ splitmix64(index)))
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

//! Deterministic seed derivation.
//!
//! Every Monte Carlo trial draws from its own ChaCha stream whose seed is a
//! hash of `(global seed, experiment id, parameter tuple, trial index)`. The
//! hash is SHA-256 truncated to 64 bits so that seeds are stable across
//! platforms and toolchain versions, and any single trial can be replayed
//! without running the ones before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Builder for a derived seed. Components are length-prefixed so that
/// `("ab", "c")` and `("a", "bc")` hash differently.
#[derive(Clone)]
pub struct SeedBuilder {
    hasher: Sha256,
}

impl SeedBuilder {
    pub fn new(global_seed: u64, experiment: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(global_seed.to_le_bytes());
        let b = Self { hasher };
        b.label(experiment)
    }

    pub fn label(mut self, s: &str) -> Self {
        self.hasher.update((s.len() as u64).to_le_bytes());
        self.hasher.update(s.as_bytes());
        self
    }

    pub fn int(mut self, v: u64) -> Self {
        self.hasher.update([0x01]);
        self.hasher.update(v.to_le_bytes());
        self
    }

    /// Floats are hashed by bit pattern; `-0.0` and `0.0` are distinct.
    pub fn float(mut self, v: f64) -> Self {
        self.hasher.update([0x02]);
        self.hasher.update(v.to_bits().to_le_bytes());
        self
    }

    pub fn finish(self) -> u64 {
        let digest = self.hasher.finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(bytes)
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.finish())
    }
}

/// Shorthand for the common `(global, experiment, params..., trial)` case.
pub fn trial_seed(global_seed: u64, experiment: &str, params: &[f64], trial: u64) -> u64 {
    params
        .iter()
        .fold(SeedBuilder::new(global_seed, experiment), |b, &p| b.float(p))
        .int(trial)
        .finish()
}

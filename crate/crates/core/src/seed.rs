//! Seed fan-out: one master seed reproduces every stochastic stage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Derives the seed of a named stage from the master seed.
pub fn derive(master: u64, stage: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(stage.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Seed for one instance of a per-instance job.
pub fn for_instance(base: u64, index: usize) -> u64 {
    base ^ index as u64
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_seeds_differ_and_repeat() {
        assert_eq!(derive(42, "split"), derive(42, "split"));
        assert_ne!(derive(42, "split"), derive(42, "model"));
        assert_ne!(derive(42, "split"), derive(43, "split"));
    }
}

//! Seed derivation and the fixed PRNG family.
//!
//! Every random stream in the crate is a `ChaCha12Rng` seeded from a 64-bit child seed.
//! Child seeds are the first eight bytes (little endian) of
//! `SHA-256(master_le || role || 0x00 || index_le)`, so a stream depends only on
//! `(master, role, index)` and never on the order in which streams are created.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha12Rng;

/// Role tags used when deriving child seeds.
pub mod role {
    pub const DATASET: &str = "dataset";
    pub const SAMPLE: &str = "sample";
    pub const SPLIT: &str = "split";
    pub const LIFT: &str = "lift";
    pub const LIFT_ROW: &str = "lift-row";
    pub const INIT: &str = "init";
    pub const SHUFFLE: &str = "shuffle";
    pub const TRAIN: &str = "train";
}

pub fn child_seed(master: u64, role: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(role.as_bytes());
    hasher.update([0u8]);
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

pub fn child_rng(master: u64, role: &str, index: u64) -> Rng {
    rng_from_seed(child_seed(master, role, index))
}

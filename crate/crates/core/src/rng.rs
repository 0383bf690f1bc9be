//! Seed derivation. Every random stream is keyed by `(seed, purpose, index)`
//! and hashed with SHA-256 into a ChaCha seed, so streams never overlap and
//! results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha12Rng;

/// Derive the 32-byte ChaCha key for a stream.
pub fn derive_key(seed: u64, purpose: &str, index: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((purpose.len() as u64).to_le_bytes());
    h.update(purpose.as_bytes());
    h.update(index.to_le_bytes());
    let out = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&out);
    key
}

/// Independent random stream for `(seed, purpose, index)`.
pub fn stream(seed: u64, purpose: &str, index: u64) -> StreamRng {
    StreamRng::from_seed(derive_key(seed, purpose, index))
}

/// Child seed, for APIs that take a plain `u64`.
pub fn child_seed(seed: u64, purpose: &str, index: u64) -> u64 {
    let k = derive_key(seed, purpose, index);
    u64::from_le_bytes(k[..8].try_into().unwrap())
}

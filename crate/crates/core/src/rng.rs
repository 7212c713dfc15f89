//! Splittable, counter-based random streams.
//!
//! A stream is a 256-bit key derived from a master seed and a path of labels
//! and indices. Each key seeds a ChaCha20 block cipher in counter mode, so a
//! task's randomness depends only on its path, never on which thread runs it
//! or in what order.

use num_bigint::BigUint;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SeedStream {
    key: [u8; 32],
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"stdiff/root");
        h.update(seed.to_le_bytes());
        Self { key: h.finalize().into() }
    }

    /// Derives the sub-stream at `index`.
    pub fn child(&self, index: u64) -> Self {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update([1u8]);
        h.update(index.to_le_bytes());
        Self { key: h.finalize().into() }
    }

    /// Derives a labelled sub-stream.
    pub fn named(&self, label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update([2u8]);
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        Self { key: h.finalize().into() }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        ChaCha20Rng::from_seed(self.key)
    }

    /// A 64-bit seed for APIs that take a plain `u64`.
    pub fn derive_seed(&self) -> u64 {
        u64::from_le_bytes(self.key[..8].try_into().expect("32-byte key"))
    }
}

/// Uniform integer in `[0, 2^bits)`.
pub fn random_bits<R: RngCore + ?Sized>(rng: &mut R, bits: u64) -> BigUint {
    if bits == 0 {
        return BigUint::default();
    }
    let words = bits.div_ceil(32) as usize;
    let mut digits = vec![0u32; words];
    for d in digits.iter_mut() {
        *d = rng.next_u32();
    }
    let spare = (words as u64 * 32 - bits) as u32;
    if spare > 0 {
        let last = digits.last_mut().unwrap();
        *last &= u32::MAX >> spare;
    }
    BigUint::new(digits)
}

/// Uniform integer in `[0, bound)` by rejection; `bound` must be positive.
pub fn random_below<R: RngCore + ?Sized>(rng: &mut R, bound: &BigUint) -> BigUint {
    assert!(bound.bits() > 0, "empty range");
    let bits = bound.bits();
    loop {
        let v = random_bits(rng, bits);
        if &v < bound {
            return v;
        }
    }
}

/// Uniform `f64` in `[0, 1)` on the 2^-53 grid.
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

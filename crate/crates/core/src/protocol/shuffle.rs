//! Keyed permutations used to hide bit positions from a known-plaintext
//! attacker.
//!
//! Instead of a stored list of `2^n_b` permutations, a permutation is
//! generated on demand by a Fisher–Yates shuffle driven by ChaCha20 keyed
//! with `SHA-256(list_seed ‖ selector ‖ length)`. The family has the same
//! cardinality and the same per-guess success probability `2^-n_b`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use super::ProtocolError;

pub const MIN_SELECTOR_BITS: u8 = 16;
pub const MAX_SELECTOR_BITS: u8 = 64;
pub const DEFAULT_SELECTOR_BITS: u8 = 32;

#[derive(Clone, PartialEq, Eq)]
pub struct ShuffleConfig {
    selector_bits: u8,
    list_seed: [u8; 32],
    enabled: bool,
}

impl std::fmt::Debug for ShuffleConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShuffleConfig")
            .field("selector_bits", &self.selector_bits)
            .field("enabled", &self.enabled)
            .finish_non_exhaustive()
    }
}

impl ShuffleConfig {
    pub fn new(selector_bits: u8, list_seed: [u8; 32], enabled: bool) -> Result<Self, ProtocolError> {
        if !(MIN_SELECTOR_BITS..=MAX_SELECTOR_BITS).contains(&selector_bits) {
            return Err(ProtocolError::SelectorWidth(selector_bits));
        }
        Ok(Self { selector_bits, list_seed, enabled })
    }

    pub fn enabled(selector_bits: u8, list_seed: [u8; 32]) -> Result<Self, ProtocolError> {
        Self::new(selector_bits, list_seed, true)
    }

    pub fn disabled() -> Self {
        Self { selector_bits: DEFAULT_SELECTOR_BITS, list_seed: [0; 32], enabled: false }
    }

    pub fn selector_bits(&self) -> u8 {
        self.selector_bits
    }

    pub fn list_seed(&self) -> &[u8; 32] {
        &self.list_seed
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    /// Chance that one blind guess picks the right permutation.
    pub fn guess_probability(&self) -> f64 {
        2f64.powi(-(self.selector_bits as i32))
    }
}

/// The permutation selected by `selector` (only the low `selector_bits`
/// matter to callers; the full value is hashed). Entry `j` is the source
/// index placed at position `j`.
pub fn select_permutation(selector: u64, list_seed: &[u8; 32], length: usize) -> Vec<usize> {
    let mut hasher = Sha256::new();
    hasher.update(b"notp/shuffle/v1");
    hasher.update(list_seed);
    hasher.update(selector.to_le_bytes());
    hasher.update((length as u64).to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(hasher.finalize().into());
    let mut perm: Vec<usize> = (0..length).collect();
    for i in (1..length).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

pub fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (pos, &src) in perm.iter().enumerate() {
        inv[src] = pos;
    }
    inv
}

/// `out[j] = items[perm[j]]`.
pub fn apply<T: Copy>(perm: &[usize], items: &[T]) -> Vec<T> {
    assert_eq!(perm.len(), items.len(), "permutation length mismatch");
    perm.iter().map(|&src| items[src]).collect()
}

/// Undoes [`apply`]: `out[perm[j]] = shuffled[j]`.
pub fn unapply<T: Copy + Default>(perm: &[usize], shuffled: &[T]) -> Vec<T> {
    assert_eq!(perm.len(), shuffled.len(), "permutation length mismatch");
    let mut out = vec![T::default(); shuffled.len()];
    for (pos, &src) in perm.iter().enumerate() {
        out[src] = shuffled[pos];
    }
    out
}

pub(crate) fn check_length(length: usize) -> Result<(), ProtocolError> {
    if length < 2 {
        return Err(ProtocolError::ShuffleTooShort(length));
    }
    Ok(())
}

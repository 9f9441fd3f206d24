//! Randomness sources standing in for the physical random generator.
//!
//! Every consumer of randomness takes an explicit [`EntropyStream`]. Two
//! implementations are provided: [`OsEntropy`] draws from the operating
//! system CSPRNG for live runs, [`SeededEntropy`] is a ChaCha20 stream for
//! reproducible tests. [`BoundedEntropy`] wraps either one with a hard byte
//! budget so exhaustion paths can be exercised.

use rand::rngs::OsRng;
use rand::{RngCore, SeedableRng, TryRngCore};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::EntropyError;

/// A source of uniformly random bytes that may run dry.
pub trait EntropyStream {
    /// Fills `dest` completely or fails; a failed call must not be retried
    /// with the same partially written buffer.
    fn try_fill(&mut self, dest: &mut [u8]) -> Result<(), EntropyError>;

    fn next_u64(&mut self) -> Result<u64, EntropyError> {
        let mut buf = [0u8; 8];
        self.try_fill(&mut buf)?;
        Ok(u64::from_le_bytes(buf))
    }

    /// One standard normal variate.
    fn standard_normal(&mut self) -> Result<f64, EntropyError> {
        let mut adapter = StickyRng { inner: self, failed: None, filler: ChaCha20Rng::seed_from_u64(0) };
        let z: f64 = StandardNormal.sample(&mut adapter);
        match adapter.failed {
            Some(err) => Err(err),
            None => Ok(z),
        }
    }
}

impl<T: EntropyStream + ?Sized> EntropyStream for &mut T {
    fn try_fill(&mut self, dest: &mut [u8]) -> Result<(), EntropyError> {
        (**self).try_fill(dest)
    }
}

impl<T: EntropyStream + ?Sized> EntropyStream for Box<T> {
    fn try_fill(&mut self, dest: &mut [u8]) -> Result<(), EntropyError> {
        (**self).try_fill(dest)
    }
}

// Bridges a fallible stream into `RngCore` for `rand_distr`. The first
// failure is latched and the sample that observed it is discarded. After a
// failure the bytes come from a fixed filler generator, since a rejection
// sampler fed constant bytes may never terminate.
struct StickyRng<'a, E: ?Sized> {
    inner: &'a mut E,
    failed: Option<EntropyError>,
    filler: ChaCha20Rng,
}

impl<E: EntropyStream + ?Sized> RngCore for StickyRng<'_, E> {
    fn next_u32(&mut self) -> u32 {
        let mut buf = [0u8; 4];
        self.fill_bytes(&mut buf);
        u32::from_le_bytes(buf)
    }

    fn next_u64(&mut self) -> u64 {
        let mut buf = [0u8; 8];
        self.fill_bytes(&mut buf);
        u64::from_le_bytes(buf)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        if self.failed.is_none() {
            match self.inner.try_fill(dest) {
                Ok(()) => return,
                Err(err) => self.failed = Some(err),
            }
        }
        self.filler.fill_bytes(dest);
    }
}

/// Operating-system randomness. Never exhausts under normal operation.
#[derive(Debug, Default, Clone, Copy)]
pub struct OsEntropy;

impl EntropyStream for OsEntropy {
    fn try_fill(&mut self, dest: &mut [u8]) -> Result<(), EntropyError> {
        OsRng
            .try_fill_bytes(dest)
            .map_err(|e| EntropyError::Source(e.to_string()))
    }
}

/// Deterministic ChaCha20 stream keyed by a 64-bit seed.
#[derive(Debug, Clone)]
pub struct SeededEntropy {
    rng: ChaCha20Rng,
}

impl SeededEntropy {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha20Rng::seed_from_u64(seed) }
    }

    /// Independent sub-stream for worker `index`, derived from a master seed.
    /// Results depend only on `(master, index)`, never on scheduling.
    pub fn substream(master: u64, index: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"notp/substream");
        hasher.update(master.to_le_bytes());
        hasher.update(index.to_le_bytes());
        let seed: [u8; 32] = hasher.finalize().into();
        Self { rng: ChaCha20Rng::from_seed(seed) }
    }
}

impl EntropyStream for SeededEntropy {
    fn try_fill(&mut self, dest: &mut [u8]) -> Result<(), EntropyError> {
        self.rng.fill_bytes(dest);
        Ok(())
    }
}

/// Wraps a stream with a finite byte budget.
#[derive(Debug, Clone)]
pub struct BoundedEntropy<E> {
    inner: E,
    remaining: usize,
}

impl<E: EntropyStream> BoundedEntropy<E> {
    pub fn new(inner: E, budget_bytes: usize) -> Self {
        Self { inner, remaining: budget_bytes }
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }
}

impl<E: EntropyStream> EntropyStream for BoundedEntropy<E> {
    fn try_fill(&mut self, dest: &mut [u8]) -> Result<(), EntropyError> {
        if dest.len() > self.remaining {
            self.remaining = 0;
            return Err(EntropyError::Exhausted);
        }
        self.remaining -= dest.len();
        self.inner.try_fill(dest)
    }
}

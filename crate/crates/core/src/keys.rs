//! Shared secret bit sequences.

use std::fmt;

/// A single binary value: a data bit or a basis selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[repr(transparent)]
pub struct Bit(bool);

impl Bit {
    pub const ZERO: Bit = Bit(false);
    pub const ONE: Bit = Bit(true);

    pub fn new(value: bool) -> Self {
        Bit(value)
    }

    pub fn is_one(self) -> bool {
        self.0
    }

    pub fn as_u8(self) -> u8 {
        self.0 as u8
    }
}

impl From<bool> for Bit {
    fn from(value: bool) -> Self {
        Bit(value)
    }
}

impl From<Bit> for bool {
    fn from(bit: Bit) -> Self {
        bit.0
    }
}

impl std::ops::BitXor for Bit {
    type Output = Bit;
    fn bitxor(self, rhs: Bit) -> Bit {
        Bit(self.0 ^ rhs.0)
    }
}

impl fmt::Display for Bit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Where a key buffer came from in the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeyOrigin {
    /// The starting key shared out of band. Never exported.
    Genesis,
    /// `K_t` agreed during cycle `t - 1`.
    Cycle(u32),
    /// Material loaded from or destined for a key file.
    Imported,
    /// Scratch buffers: fresh PhRG output, pending keys, decoded bits.
    Fresh,
}

/// An ordered bit sequence with a one-way consumption watermark.
///
/// Bits before `watermark` are spent. The watermark only moves forward;
/// [`KeyBuffer::take`] is the sole way to hand out spendable bits.
#[derive(Clone, PartialEq, Eq)]
pub struct KeyBuffer {
    bits: Vec<Bit>,
    origin: KeyOrigin,
    watermark: usize,
    // Bits at or after `end` were consumed from the back.
    end: usize,
}

// Key material must not end up in logs by accident.
impl fmt::Debug for KeyBuffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyBuffer")
            .field("len", &self.bits.len())
            .field("origin", &self.origin)
            .field("watermark", &self.watermark)
            .field("end", &self.end)
            .finish()
    }
}

impl KeyBuffer {
    pub fn new(bits: Vec<Bit>, origin: KeyOrigin) -> Self {
        let end = bits.len();
        Self { bits, origin, watermark: 0, end }
    }

    pub fn empty(origin: KeyOrigin) -> Self {
        Self::new(Vec::new(), origin)
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>, origin: KeyOrigin) -> Self {
        Self::new(bits.into_iter().map(Bit::from).collect(), origin)
    }

    /// Unpacks `bit_len` bits from MSB-first bytes.
    pub fn from_packed(bytes: &[u8], bit_len: usize, origin: KeyOrigin) -> Self {
        assert!(bit_len <= bytes.len() * 8, "bit length exceeds payload");
        let bits = (0..bit_len)
            .map(|i| Bit::from(bytes[i / 8] >> (7 - i % 8) & 1 == 1))
            .collect();
        Self::new(bits, origin)
    }

    /// Packs all bits MSB-first; trailing pad bits are zero.
    pub fn to_packed(&self) -> Vec<u8> {
        pack_bits(&self.bits)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn origin(&self) -> KeyOrigin {
        self.origin
    }

    pub fn set_origin(&mut self, origin: KeyOrigin) {
        self.origin = origin;
    }

    pub fn bits(&self) -> &[Bit] {
        &self.bits
    }

    pub fn get(&self, index: usize) -> Option<Bit> {
        self.bits.get(index).copied()
    }

    pub fn watermark(&self) -> usize {
        self.watermark
    }

    pub fn remaining(&self) -> usize {
        self.end - self.watermark
    }

    /// Bits not yet consumed from either end.
    pub fn unspent(&self) -> &[Bit] {
        &self.bits[self.watermark..self.end]
    }

    /// Consumes the next `count` bits, or returns `None` without moving the
    /// watermark when fewer remain.
    pub fn take(&mut self, count: usize) -> Option<&[Bit]> {
        if count > self.remaining() {
            return None;
        }
        let start = self.watermark;
        self.watermark += count;
        Some(&self.bits[start..self.watermark])
    }

    /// Consumes `count` bits from the back of the unspent range. The
    /// returned slice is in buffer order.
    pub fn take_back(&mut self, count: usize) -> Option<&[Bit]> {
        if count > self.remaining() {
            return None;
        }
        self.end -= count;
        Some(&self.bits[self.end..self.end + count])
    }

    /// Hamming distance over the common prefix plus the length difference.
    pub fn mismatches(&self, other: &KeyBuffer) -> usize {
        let common = self.len().min(other.len());
        let differ = self.bits[..common]
            .iter()
            .zip(&other.bits[..common])
            .filter(|(a, b)| a != b)
            .count();
        differ + self.len().max(other.len()) - common
    }

    pub fn into_bits(self) -> Vec<Bit> {
        self.bits
    }
}

pub fn pack_bits(bits: &[Bit]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, bit) in bits.iter().enumerate() {
        if bit.is_one() {
            out[i / 8] |= 1 << (7 - i % 8);
        }
    }
    out
}

/// Reads up to 64 bits as an unsigned integer, most significant first.
pub fn bits_to_u64(bits: &[Bit]) -> u64 {
    assert!(bits.len() <= 64);
    bits.iter().fold(0u64, |acc, b| (acc << 1) | b.as_u8() as u64)
}

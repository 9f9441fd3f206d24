use hmac::{Hmac, KeyInit, Mac};
use sha2::Sha256;

use super::session::SessionState;
use super::ProtocolError;
use crate::keys::{pack_bits, Bit, KeyBuffer};

/// Key size for message tags.
pub const MAC_KEY_BITS: usize = 256;

/// Unspent shared bits that can be consumed exactly once.
pub trait SecretSource {
    fn unspent_bits(&self) -> usize;

    /// All-or-nothing: on error nothing is consumed.
    fn draw_bits(&mut self, count: usize) -> Result<Vec<Bit>, ProtocolError>;
}

impl SecretSource for SessionState {
    fn unspent_bits(&self) -> usize {
        self.harvested_unspent()
    }

    fn draw_bits(&mut self, count: usize) -> Result<Vec<Bit>, ProtocolError> {
        self.draw_harvested(count)
    }
}

impl SecretSource for KeyBuffer {
    fn unspent_bits(&self) -> usize {
        self.remaining()
    }

    fn draw_bits(&mut self, count: usize) -> Result<Vec<Bit>, ProtocolError> {
        let available = self.remaining();
        self.take(count)
            .map(<[Bit]>::to_vec)
            .ok_or(ProtocolError::KeyStarvation { needed: count, available })
    }
}

pub fn xor_keystream(message: &[u8], key_bits: &[Bit]) -> Vec<u8> {
    assert_eq!(key_bits.len(), message.len() * 8, "keystream length mismatch");
    message.iter().zip(pack_bits(key_bits)).map(|(m, k)| m ^ k).collect()
}

/// XORs `message` with the next `8·len` unspent key bits. Never reuses bits;
/// starvation is an error.
pub fn otp_encrypt(message: &[u8], keys: &mut impl SecretSource) -> Result<Vec<u8>, ProtocolError> {
    let bits = keys.draw_bits(message.len() * 8)?;
    Ok(xor_keystream(message, &bits))
}

/// Same operation as [`otp_encrypt`], run against the peer's mirrored key.
pub fn otp_decrypt(ciphertext: &[u8], keys: &mut impl SecretSource) -> Result<Vec<u8>, ProtocolError> {
    otp_encrypt(ciphertext, keys)
}

fn keyed_mac(message: &[u8], keys: &mut impl SecretSource) -> Result<Hmac<Sha256>, ProtocolError> {
    let key = pack_bits(&keys.draw_bits(MAC_KEY_BITS)?);
    let mut mac = <Hmac<Sha256> as KeyInit>::new_from_slice(&key).expect("HMAC accepts any key length");
    mac.update(message);
    Ok(mac)
}

/// HMAC-SHA256 tag under 256 freshly consumed key bits.
pub fn mac_tag(message: &[u8], keys: &mut impl SecretSource) -> Result<[u8; 32], ProtocolError> {
    Ok(keyed_mac(message, keys)?.finalize().into_bytes().into())
}

/// Recomputes the tag with the mirrored key and compares in constant time.
pub fn mac_verify(message: &[u8], tag: &[u8; 32], keys: &mut impl SecretSource) -> Result<bool, ProtocolError> {
    Ok(keyed_mac(message, keys)?.verify_slice(tag).is_ok())
}

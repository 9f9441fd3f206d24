//! On-disk key format.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "NOPK"
//! 4       1     version 0x01
//! 5       1     flags; low nibble = digest algorithm (0x01 = SHA-256)
//! 6       8     bit length, little-endian u64
//! 14      n     ceil(len/8) payload bytes, MSB-first, zero padded
//! 14+n    32    digest of bytes [0, 14+n)
//! ```
//!
//! Files hold secret material and should be created owner-read-only
//! (mode 0400 on Unix); [`write_key_file`] does that.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::keys::{KeyBuffer, KeyOrigin};

pub const MAGIC: [u8; 4] = *b"NOPK";
pub const VERSION: u8 = 0x01;
pub const DIGEST_SHA256: u8 = 0x01;
pub const HEADER_LEN: usize = 14;
pub const DIGEST_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum KeyFileError {
    #[error("not a key file (bad magic)")]
    BadMagic,
    #[error("unsupported key file version {0:#04x}")]
    BadVersion(u8),
    #[error("unsupported digest algorithm {0:#04x}")]
    BadDigestAlgorithm(u8),
    #[error("key file truncated or oversized: expected {expected} bytes, got {got}")]
    Length { expected: usize, got: usize },
    #[error("key file integrity digest mismatch")]
    Integrity,
    #[error("non-zero padding bits in key payload")]
    Padding,
    #[error("genesis keys are never serialized through this path")]
    GenesisExport,
    #[error("{0} already exists")]
    Exists(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Serializes a key. Genesis buffers are refused unless `allow_genesis` is
/// set, which only key generation does.
pub fn encode(key: &KeyBuffer, allow_genesis: bool) -> Result<Vec<u8>, KeyFileError> {
    if key.origin() == KeyOrigin::Genesis && !allow_genesis {
        return Err(KeyFileError::GenesisExport);
    }
    let payload = key.to_packed();
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + DIGEST_LEN);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(DIGEST_SHA256);
    out.extend_from_slice(&(key.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

pub fn decode(bytes: &[u8], origin: KeyOrigin) -> Result<KeyBuffer, KeyFileError> {
    if bytes.len() < HEADER_LEN + DIGEST_LEN {
        return Err(KeyFileError::Length { expected: HEADER_LEN + DIGEST_LEN, got: bytes.len() });
    }
    if bytes[..4] != MAGIC {
        return Err(KeyFileError::BadMagic);
    }
    if bytes[4] != VERSION {
        return Err(KeyFileError::BadVersion(bytes[4]));
    }
    let algorithm = bytes[5] & 0x0f;
    if algorithm != DIGEST_SHA256 {
        return Err(KeyFileError::BadDigestAlgorithm(algorithm));
    }
    let bit_len = u64::from_le_bytes(bytes[6..14].try_into().expect("8 bytes"));
    let payload_len = usize::try_from(bit_len.div_ceil(8)).map_err(|_| KeyFileError::Length {
        expected: usize::MAX,
        got: bytes.len(),
    })?;
    let expected = HEADER_LEN
        .checked_add(payload_len)
        .and_then(|n| n.checked_add(DIGEST_LEN))
        .unwrap_or(usize::MAX);
    if bytes.len() != expected {
        return Err(KeyFileError::Length { expected, got: bytes.len() });
    }
    let body_end = HEADER_LEN + payload_len;
    if Sha256::digest(&bytes[..body_end]).as_slice() != &bytes[body_end..] {
        return Err(KeyFileError::Integrity);
    }
    let payload = &bytes[HEADER_LEN..body_end];
    let bit_len = bit_len as usize;
    if bit_len % 8 != 0 && payload[payload_len - 1] & (0xff >> (bit_len % 8)) != 0 {
        return Err(KeyFileError::Padding);
    }
    Ok(KeyBuffer::from_packed(payload, bit_len, origin))
}

/// SHA-256 of the encoded file; identifies a key without revealing it.
pub fn key_id(encoded: &[u8]) -> [u8; 32] {
    Sha256::digest(encoded).into()
}

/// Writes an encoded key with owner-read-only permissions. Refuses to
/// replace an existing file unless `overwrite` is set.
pub fn write_key_file(path: &Path, encoded: &[u8], overwrite: bool) -> Result<(), KeyFileError> {
    if path.exists() {
        if !overwrite {
            return Err(KeyFileError::Exists(path.display().to_string()));
        }
        // Read-only files cannot be opened for writing; replace instead.
        fs::remove_file(path)?;
    }
    let mut options = OpenOptions::new();
    options.write(true).create_new(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        options.mode(0o400);
    }
    let mut file = options.open(path)?;
    file.write_all(encoded)?;
    file.sync_all()?;
    Ok(())
}

pub fn read_key_file(path: &Path, origin: KeyOrigin) -> Result<(KeyBuffer, [u8; 32]), KeyFileError> {
    let bytes = fs::read(path)?;
    let key = decode(&bytes, origin)?;
    Ok((key, key_id(&bytes)))
}

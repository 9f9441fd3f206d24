use thiserror::Error;

use crate::physics::{DeltaPhi, NoiseParams, PhaseSample};
use crate::protocol::RekeyReason;

use super::frame::FrameType;

/// Marks a free-form Δφ in place of an exponent byte.
pub const DPHI_RADIANS_SENTINEL: u8 = 0x80;
/// Largest batch the wire profile carries (the ACK count is 16 bits).
pub const MAX_WIRE_BATCH: usize = u16::MAX as usize;
/// Widest sample the version 0x01 profile carries.
pub const WIRE_ADC_BITS: u32 = 16;
pub const MAX_ERROR_MESSAGE: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PayloadError {
    #[error("{kind:?} payload has {got} bytes, expected {expected}")]
    Length { kind: FrameType, expected: usize, got: usize },
    #[error("malformed {kind:?} payload: {reason}")]
    Malformed { kind: FrameType, reason: &'static str },
}

fn expect_len(kind: FrameType, bytes: &[u8], expected: usize) -> Result<(), PayloadError> {
    if bytes.len() == expected {
        Ok(())
    } else {
        Err(PayloadError::Length { kind, expected, got: bytes.len() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HelloPayload {
    pub mean_photon_number: f64,
    pub delta_phi: DeltaPhi,
    pub adc_bits: u8,
    /// Shuffle selector width; 0 when the shuffle is off.
    pub n_b: u8,
    pub key_id: [u8; 32],
    pub nonce: [u8; 16],
}

impl HelloPayload {
    pub fn new(params: &NoiseParams, n_b: u8, key_id: [u8; 32], nonce: [u8; 16]) -> Self {
        Self {
            mean_photon_number: params.mean_photon_number(),
            delta_phi: params.delta_phi_spec(),
            adc_bits: params.adc_bits() as u8,
            n_b,
            key_id,
            nonce,
        }
    }

    pub fn encoded_len(&self) -> usize {
        match self.delta_phi {
            DeltaPhi::Exponent(_) => 59,
            DeltaPhi::Radians(_) => 67,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&self.mean_photon_number.to_le_bytes());
        match self.delta_phi {
            DeltaPhi::Exponent(m) => {
                debug_assert_ne!(m as u8, DPHI_RADIANS_SENTINEL);
                out.push(m as u8);
            }
            DeltaPhi::Radians(x) => {
                out.push(DPHI_RADIANS_SENTINEL);
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out.push(self.adc_bits);
        out.push(self.n_b);
        out.extend_from_slice(&self.key_id);
        out.extend_from_slice(&self.nonce);
        out
    }

    pub fn decode(kind: FrameType, bytes: &[u8]) -> Result<Self, PayloadError> {
        let short = PayloadError::Length { kind, expected: 59, got: bytes.len() };
        if bytes.len() < 9 {
            return Err(short);
        }
        let mean_photon_number = f64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"));
        let (delta_phi, rest) = if bytes[8] == DPHI_RADIANS_SENTINEL {
            expect_len(kind, bytes, 67)?;
            (DeltaPhi::Radians(f64::from_le_bytes(bytes[9..17].try_into().expect("8 bytes"))), &bytes[17..])
        } else {
            expect_len(kind, bytes, 59)?;
            (DeltaPhi::Exponent(bytes[8] as i8), &bytes[9..])
        };
        Ok(Self {
            mean_photon_number,
            delta_phi,
            adc_bits: rest[0],
            n_b: rest[1],
            key_id: rest[2..34].try_into().expect("32 bytes"),
            nonce: rest[34..50].try_into().expect("16 bytes"),
        })
    }

    /// Parameters and key agree; nonces are expected to differ.
    pub fn agrees_with(&self, other: &HelloPayload) -> bool {
        let same_dphi = match (self.delta_phi, other.delta_phi) {
            (DeltaPhi::Exponent(a), DeltaPhi::Exponent(b)) => a == b,
            (DeltaPhi::Radians(a), DeltaPhi::Radians(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        };
        self.mean_photon_number.to_bits() == other.mean_photon_number.to_bits()
            && same_dphi
            && self.adc_bits == other.adc_bits
            && self.n_b == other.n_b
            && self.key_id == other.key_id
    }

    pub fn params(&self) -> Result<NoiseParams, crate::error::ParamError> {
        NoiseParams::new(self.mean_photon_number, self.delta_phi, self.adc_bits.into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPayload {
    pub cycle: u32,
    pub samples: Vec<u16>,
}

impl BatchPayload {
    pub fn from_samples(cycle: u32, samples: &[PhaseSample]) -> Self {
        let samples = samples
            .iter()
            .map(|s| u16::try_from(s.grid_index()).expect("16-bit wire profile"))
            .collect();
        Self { cycle, samples }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 2 * self.samples.len());
        out.extend_from_slice(&self.cycle.to_le_bytes());
        out.extend_from_slice(&(self.samples.len() as u32).to_le_bytes());
        for s in &self.samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PayloadError> {
        let kind = FrameType::Batch;
        if bytes.len() < 8 {
            return Err(PayloadError::Length { kind, expected: 8, got: bytes.len() });
        }
        let cycle = u32::from_le_bytes(bytes[..4].try_into().expect("4 bytes"));
        let count = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        expect_len(kind, bytes, 8usize.saturating_add(count.saturating_mul(2)))?;
        let samples = bytes[8..].chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
        Ok(Self { cycle, samples })
    }

    /// Samples as grid indices on an `adc_bits` grid; `None` if any index
    /// is out of range.
    pub fn phase_samples(&self, adc_bits: u32) -> Option<Vec<PhaseSample>> {
        self.samples.iter().map(|&s| PhaseSample::new(s.into(), adc_bits)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AckPayload {
    pub count: u16,
    pub digest: [u8; 32],
}

impl AckPayload {
    pub const LEN: usize = 34;

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::LEN);
        out.extend_from_slice(&self.count.to_le_bytes());
        out.extend_from_slice(&self.digest);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PayloadError> {
        expect_len(FrameType::BatchAck, bytes, Self::LEN)?;
        Ok(Self {
            count: u16::from_le_bytes([bytes[0], bytes[1]]),
            digest: bytes[2..].try_into().expect("32 bytes"),
        })
    }
}

pub fn encode_rekey(reason: RekeyReason) -> Vec<u8> {
    vec![match reason {
        RekeyReason::BudgetExhausted => 1,
        RekeyReason::BasisExhausted => 2,
        RekeyReason::ControlExhausted => 3,
    }]
}

pub fn decode_rekey(bytes: &[u8]) -> Result<RekeyReason, PayloadError> {
    let kind = FrameType::RekeyNeeded;
    expect_len(kind, bytes, 1)?;
    match bytes[0] {
        1 => Ok(RekeyReason::BudgetExhausted),
        2 => Ok(RekeyReason::BasisExhausted),
        3 => Ok(RekeyReason::ControlExhausted),
        _ => Err(PayloadError::Malformed { kind, reason: "unknown rekey reason" }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    Framing = 1,
    Handshake = 2,
    Integrity = 3,
    Protocol = 4,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorPayload {
    pub code: u8,
    pub message: String,
}

impl ErrorPayload {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        let mut message = message.into();
        if message.len() > MAX_ERROR_MESSAGE {
            let mut cut = MAX_ERROR_MESSAGE;
            while !message.is_char_boundary(cut) {
                cut -= 1;
            }
            message.truncate(cut);
        }
        Self { code: code as u8, message }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = vec![self.code];
        out.extend_from_slice(self.message.as_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PayloadError> {
        let kind = FrameType::Error;
        if bytes.is_empty() || bytes.len() > 1 + MAX_ERROR_MESSAGE {
            return Err(PayloadError::Length { kind, expected: 1, got: bytes.len() });
        }
        Ok(Self { code: bytes[0], message: String::from_utf8_lossy(&bytes[1..]).into_owned() })
    }
}

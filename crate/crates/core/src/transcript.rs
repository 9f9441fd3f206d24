//! Recorded traffic and its ground-truth sidecar.
//!
//! A transcript is the frames of one session concatenated verbatim in the
//! order they crossed the wire: exactly what a tap on the channel sees.
//! The truth sidecar is a separate text file with the hidden bits of each
//! cycle. It holds basis-key material and exists only for scoring attack
//! experiments.
//!
//! Sidecar format, one line per cycle after a header line:
//!
//! ```text
//! # notp-truth v1
//! cycle=0 sender=initiator count=256 selector=- data=<hex> bases=<hex>
//! ```
//!
//! `data` is the wire-order data bits and `bases` the basis bits, both
//! packed MSB first; `selector` is the shuffle selector in decimal or `-`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::keys::{pack_bits, Bit, KeyBuffer, KeyOrigin};
use crate::net::{decode_frame, BatchPayload, Frame, FrameError, FrameType, HelloPayload, PayloadError};
use crate::physics::{NoiseParams, PhaseSample};
use crate::protocol::{BatchTruth, Role};

pub const TRUTH_HEADER: &str = "# notp-truth v1";

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("frame {index}: {source}")]
    Frame { index: usize, source: FrameError },
    #[error(transparent)]
    Payload(#[from] PayloadError),
    #[error("transcript has no HELLO frame")]
    MissingHello,
    #[error("transcript parameters are invalid: {0}")]
    Params(#[from] crate::error::ParamError),
    #[error("sample index out of range in cycle {0}")]
    SampleRange(u32),
    #[error("truth line {line}: {reason}")]
    Truth { line: usize, reason: String },
    #[error("truth does not match transcript: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleTruth {
    pub cycle: u32,
    pub sender: Role,
    pub data_bits: Vec<Bit>,
    pub bases: Vec<Bit>,
    pub selector: Option<u64>,
}

impl CycleTruth {
    pub fn from_batch(cycle: u32, sender: Role, truth: BatchTruth) -> Self {
        Self { cycle, sender, data_bits: truth.data_bits, bases: truth.bases, selector: truth.selector }
    }
}

/// Frames and truth accumulated while a session runs.
#[derive(Debug, Clone, Default)]
pub struct Capture {
    pub frames: Vec<u8>,
    pub truth: Vec<CycleTruth>,
}

impl Capture {
    pub fn record_frame(&mut self, bytes: &[u8]) {
        self.frames.extend_from_slice(bytes);
    }

    pub fn record_truth(&mut self, truth: CycleTruth) {
        self.truth.push(truth);
    }
}

pub fn split_frames(mut bytes: &[u8]) -> Result<Vec<Frame>, TranscriptError> {
    let mut frames = Vec::new();
    while !bytes.is_empty() {
        let (frame, rest) =
            decode_frame(bytes).map_err(|source| TranscriptError::Frame { index: frames.len(), source })?;
        frames.push(frame);
        bytes = rest;
    }
    Ok(frames)
}

/// The attacker-relevant content of a transcript.
#[derive(Debug, Clone)]
pub struct Transcript {
    pub hello: HelloPayload,
    pub batches: Vec<BatchPayload>,
}

impl Transcript {
    pub fn parse(bytes: &[u8]) -> Result<Self, TranscriptError> {
        let mut hello = None;
        let mut batches = Vec::new();
        for frame in split_frames(bytes)? {
            match frame.kind {
                FrameType::Hello if hello.is_none() => {
                    hello = Some(HelloPayload::decode(frame.kind, &frame.payload)?);
                }
                FrameType::Batch => batches.push(BatchPayload::decode(&frame.payload)?),
                _ => {}
            }
        }
        Ok(Self { hello: hello.ok_or(TranscriptError::MissingHello)?, batches })
    }

    pub fn params(&self) -> Result<NoiseParams, TranscriptError> {
        Ok(self.hello.params()?)
    }

    /// Samples of each batch in wire order.
    pub fn samples(&self) -> Result<Vec<(u32, Vec<PhaseSample>)>, TranscriptError> {
        let adc = u32::from(self.hello.adc_bits);
        self.batches
            .iter()
            .map(|b| b.phase_samples(adc).map(|s| (b.cycle, s)).ok_or(TranscriptError::SampleRange(b.cycle)))
            .collect()
    }

    /// Checks that `truth` describes exactly the batches of this transcript.
    pub fn check_truth(&self, truth: &[CycleTruth]) -> Result<(), TranscriptError> {
        if truth.len() != self.batches.len() {
            return Err(TranscriptError::Mismatch(format!(
                "{} batches recorded, {} truth lines",
                self.batches.len(),
                truth.len()
            )));
        }
        for (batch, t) in self.batches.iter().zip(truth) {
            if batch.cycle != t.cycle || batch.samples.len() != t.data_bits.len() {
                return Err(TranscriptError::Mismatch(format!(
                    "cycle {} has {} samples, truth has cycle {} with {} bits",
                    batch.cycle,
                    batch.samples.len(),
                    t.cycle,
                    t.data_bits.len()
                )));
            }
        }
        Ok(())
    }
}

pub fn render_truth(truth: &[CycleTruth]) -> String {
    let mut out = String::from(TRUTH_HEADER);
    out.push('\n');
    for t in truth {
        let sender = match t.sender {
            Role::Initiator => "initiator",
            Role::Responder => "responder",
        };
        let selector = t.selector.map_or_else(|| "-".to_string(), |s| s.to_string());
        let _ = writeln!(
            out,
            "cycle={} sender={} count={} selector={} data={} bases={}",
            t.cycle,
            sender,
            t.data_bits.len(),
            selector,
            hex::encode(pack_bits(&t.data_bits)),
            hex::encode(pack_bits(&t.bases)),
        );
    }
    out
}

pub fn parse_truth(text: &str) -> Result<Vec<CycleTruth>, TranscriptError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, TRUTH_HEADER)) => {}
        _ => return Err(TranscriptError::Truth { line: 1, reason: "missing header".into() }),
    }
    let mut out = Vec::new();
    for (index, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| TranscriptError::Truth { line: index + 1, reason: reason.to_string() };
        let mut fields = std::collections::HashMap::new();
        for part in line.split_whitespace() {
            let (k, v) = part.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            fields.insert(k, v);
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| bad(&format!("missing {k}")));
        let cycle = get("cycle")?.parse().map_err(|_| bad("bad cycle"))?;
        let sender = match get("sender")? {
            "initiator" => Role::Initiator,
            "responder" => Role::Responder,
            _ => return Err(bad("bad sender")),
        };
        let count: usize = get("count")?.parse().map_err(|_| bad("bad count"))?;
        let selector = match get("selector")? {
            "-" => None,
            s => Some(s.parse().map_err(|_| bad("bad selector"))?),
        };
        let bits = |k: &str| -> Result<Vec<Bit>, TranscriptError> {
            let bytes = hex::decode(get(k)?).map_err(|_| bad("bad hex"))?;
            if bytes.len() != count.div_ceil(8) {
                return Err(bad("bit field length disagrees with count"));
            }
            Ok(KeyBuffer::from_packed(&bytes, count, KeyOrigin::Imported).into_bits())
        };
        out.push(CycleTruth { cycle, sender, data_bits: bits("data")?, bases: bits("bases")?, selector });
    }
    Ok(out)
}

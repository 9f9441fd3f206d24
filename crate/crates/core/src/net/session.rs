use std::time::Duration;

use sha2::{Digest, Sha256};

use crate::entropy::EntropyStream;
use crate::keys::{KeyBuffer, pack_bits};
use crate::protocol::{ProtocolError, RekeyReason, Role, SessionState};
use crate::transcript::{Capture, CycleTruth};

use super::frame::{encode_frame, read_frame, Frame, FrameType, ReadError};
use super::payload::{
    decode_rekey, encode_rekey, AckPayload, BatchPayload, ErrorPayload, HelloPayload, PayloadError, MAX_WIRE_BATCH,
    WIRE_ADC_BITS,
};
use super::transport::Transport;
use super::NetError;

pub const DEFAULT_DEADLINE: Duration = Duration::from_secs(30);

#[derive(Debug, Clone)]
pub struct LinkConfig {
    /// Digest of the genesis key file, compared during the handshake.
    pub key_id: [u8; 32],
    /// Emissions per batch this side sends; clamped to what the basis key
    /// can carry.
    pub batch: usize,
    /// Per-frame deadline.
    pub deadline: Duration,
}

impl LinkConfig {
    pub fn new(key_id: [u8; 32], batch: usize) -> Self {
        Self { key_id, batch, deadline: DEFAULT_DEADLINE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionEnd {
    Completed,
    RekeyNeeded(RekeyReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionReport {
    pub session_id: [u8; 16],
    /// Cycles completed and rotated on this side.
    pub cycles: u32,
    pub end: SessionEnd,
}

/// A HELLO read by a listener, before a key has been chosen for it.
#[derive(Debug, Clone)]
pub struct IncomingHello {
    pub session_id: [u8; 16],
    pub hello: HelloPayload,
}

struct Link<'a, T: ?Sized> {
    io: &'a mut T,
    session_id: [u8; 16],
    capture: Option<&'a mut Capture>,
}

impl<T: Transport + ?Sized> Link<'_, T> {
    fn send(&mut self, kind: FrameType, payload: Vec<u8>) -> Result<(), NetError> {
        let frame = Frame::new(kind, self.session_id, payload)?;
        let bytes = encode_frame(&frame);
        self.io.write_all(&bytes).and_then(|()| self.io.flush()).map_err(NetError::from_io)?;
        if let Some(capture) = self.capture.as_deref_mut() {
            capture.record_frame(&bytes);
        }
        Ok(())
    }

    fn recv(&mut self) -> Result<Frame, NetError> {
        let frame = read_frame(self.io).map_err(|e| match e {
            ReadError::Frame(e) => NetError::Frame(e),
            ReadError::Io(e) => NetError::from_io(e),
        })?;
        if let Some(capture) = self.capture.as_deref_mut() {
            capture.record_frame(&encode_frame(&frame));
        }
        if frame.session_id != self.session_id {
            return Err(NetError::SessionMismatch);
        }
        if frame.kind == FrameType::Error {
            return Err(match ErrorPayload::decode(&frame.payload) {
                Ok(p) => NetError::Peer { code: p.code, message: p.message },
                Err(_) => NetError::Peer { code: 0, message: "unreadable error frame".into() },
            });
        }
        Ok(frame)
    }

    fn expect(&mut self, kind: FrameType) -> Result<Frame, NetError> {
        let frame = self.recv()?;
        if frame.kind != kind {
            return Err(NetError::Unexpected { expected: kind, got: frame.kind });
        }
        Ok(frame)
    }

    fn expect_close(&mut self) -> Result<(), NetError> {
        let frame = self.expect(FrameType::Close)?;
        check_empty(&frame)
    }

    // Best effort: the connection may already be gone.
    fn report(&mut self, err: &NetError) {
        if let Some(code) = err.wire_code() {
            let _ = self.send(FrameType::Error, ErrorPayload::new(code, err.to_string()).encode());
        }
    }
}

fn check_empty(frame: &Frame) -> Result<(), NetError> {
    if frame.payload.is_empty() {
        Ok(())
    } else {
        Err(PayloadError::Length { kind: frame.kind, expected: 0, got: frame.payload.len() }.into())
    }
}

/// Binds the acceptance digest to this session, both handshake nonces,
/// the cycle, the samples as transmitted and the recovered key.
#[derive(Debug, Clone, Copy)]
struct AckContext {
    session_id: [u8; 16],
    initiator_nonce: [u8; 16],
    responder_nonce: [u8; 16],
}

impl AckContext {
    fn ack(&self, cycle: u32, samples: &[u16], key: &KeyBuffer) -> AckPayload {
        let mut h = Sha256::new();
        h.update(b"notp/ack/v1");
        h.update(self.session_id);
        h.update(self.initiator_nonce);
        h.update(self.responder_nonce);
        h.update(cycle.to_le_bytes());
        h.update((samples.len() as u32).to_le_bytes());
        for s in samples {
            h.update(s.to_le_bytes());
        }
        h.update((key.len() as u32).to_le_bytes());
        h.update(pack_bits(key.bits()));
        AckPayload { count: samples.len() as u16, digest: h.finalize().into() }
    }
}

enum SendOutcome {
    Accepted(AckPayload),
    Rekey(RekeyReason),
}

struct Driver<'a, T: ?Sized, E: ?Sized> {
    link: Link<'a, T>,
    session: &'a mut SessionState,
    cfg: &'a LinkConfig,
    entropy: &'a mut E,
    ack: AckContext,
    cycles: u32,
}

impl<T: Transport + ?Sized, E: EntropyStream + ?Sized> Driver<'_, T, E> {
    fn batch_len(&self) -> usize {
        self.cfg.batch.min(self.session.basis_capacity()).min(MAX_WIRE_BATCH)
    }

    fn record_truth(&mut self, cycle: u32, sender: Role, truth: crate::protocol::BatchTruth) {
        if let Some(capture) = self.link.capture.as_deref_mut() {
            capture.record_truth(CycleTruth::from_batch(cycle, sender, truth));
        }
    }

    fn send_cycle(&mut self) -> Result<SendOutcome, NetError> {
        let count = self.batch_len();
        let min = if self.session.shuffle().is_enabled() { 2 } else { 1 };
        if count < min {
            let reason = RekeyReason::BasisExhausted;
            self.link.send(FrameType::RekeyNeeded, encode_rekey(reason))?;
            return Ok(SendOutcome::Rekey(reason));
        }
        let snapshot = self.session.clone();
        let batch = match self.session.produce_batch(count, &mut self.entropy) {
            Ok(batch) => batch,
            Err(ProtocolError::RekeyNeeded { reason, .. }) => {
                self.link.send(FrameType::RekeyNeeded, encode_rekey(reason))?;
                return Ok(SendOutcome::Rekey(reason));
            }
            Err(e) => return Err(e.into()),
        };
        let payload = BatchPayload::from_samples(batch.cycle, &batch.samples);
        if let Err(e) = self.link.send(FrameType::Batch, payload.encode()) {
            // Nothing reached the wire, so nothing is charged.
            *self.session = snapshot;
            return Err(e);
        }
        self.record_truth(batch.cycle, self.session.role(), batch.truth);
        let frame = self.link.expect(FrameType::BatchAck)?;
        let ack = AckPayload::decode(&frame.payload)?;
        if ack != self.ack.ack(batch.cycle, &payload.samples, &batch.pending_key) {
            return Err(NetError::Integrity(batch.cycle));
        }
        self.session.rotate(batch.pending_key)?;
        self.cycles += 1;
        Ok(SendOutcome::Accepted(ack))
    }

    fn receive_cycle(&mut self, frame: Frame) -> Result<(KeyBuffer, AckPayload), NetError> {
        let payload = BatchPayload::decode(&frame.payload)?;
        let cycle = self.session.cycle();
        if payload.cycle != cycle {
            return Err(NetError::OutOfSequence { expected: cycle, got: payload.cycle });
        }
        if payload.samples.is_empty() || payload.samples.len() > MAX_WIRE_BATCH {
            return Err(PayloadError::Malformed { kind: FrameType::Batch, reason: "batch count out of range" }.into());
        }
        let samples = payload
            .phase_samples(self.session.params().adc_bits())
            .ok_or(PayloadError::Malformed { kind: FrameType::Batch, reason: "sample index out of range" })?;
        let (key, truth) = self.session.consume_batch_with_truth(&samples)?;
        self.record_truth(cycle, self.session.role().peer(), truth);
        let ack = self.ack.ack(cycle, &payload.samples, &key);
        self.link.send(FrameType::BatchAck, ack.encode())?;
        Ok((key, ack))
    }

    fn confirm(&mut self, frame: &Frame, sent: &AckPayload) -> Result<(), NetError> {
        if AckPayload::decode(&frame.payload)? != *sent {
            return Err(NetError::Integrity(self.session.cycle()));
        }
        Ok(())
    }

    fn finish(&mut self, key: KeyBuffer) -> Result<(), NetError> {
        self.session.rotate(key)?;
        self.cycles += 1;
        Ok(())
    }

    fn report(&self, end: SessionEnd) -> SessionReport {
        SessionReport { session_id: self.link.session_id, cycles: self.cycles, end }
    }

    fn initiator_loop(&mut self, cycles: u32) -> Result<SessionReport, NetError> {
        loop {
            if self.session.is_sender() {
                if self.cycles == cycles {
                    self.link.send(FrameType::Close, Vec::new())?;
                    return Ok(self.report(SessionEnd::Completed));
                }
                match self.send_cycle()? {
                    SendOutcome::Rekey(reason) => {
                        self.link.send(FrameType::Close, Vec::new())?;
                        return Ok(self.report(SessionEnd::RekeyNeeded(reason)));
                    }
                    SendOutcome::Accepted(ack) => {
                        if self.cycles == cycles {
                            // CLOSE stands in for the confirmation.
                            self.link.send(FrameType::Close, Vec::new())?;
                            return Ok(self.report(SessionEnd::Completed));
                        }
                        self.link.send(FrameType::BatchAck, ack.encode())?;
                    }
                }
            } else {
                let frame = self.link.recv()?;
                match frame.kind {
                    FrameType::Batch => {
                        let (key, ack) = self.receive_cycle(frame)?;
                        let confirm = self.link.expect(FrameType::BatchAck)?;
                        self.confirm(&confirm, &ack)?;
                        self.finish(key)?;
                    }
                    FrameType::RekeyNeeded => {
                        let reason = decode_rekey(&frame.payload)?;
                        self.link.send(FrameType::Close, Vec::new())?;
                        return Ok(self.report(SessionEnd::RekeyNeeded(reason)));
                    }
                    got => return Err(NetError::Unexpected { expected: FrameType::Batch, got }),
                }
            }
        }
    }

    fn responder_loop(&mut self) -> Result<SessionReport, NetError> {
        loop {
            if self.session.is_sender() {
                match self.send_cycle()? {
                    SendOutcome::Rekey(reason) => {
                        self.link.expect_close()?;
                        return Ok(self.report(SessionEnd::RekeyNeeded(reason)));
                    }
                    SendOutcome::Accepted(ack) => self.link.send(FrameType::BatchAck, ack.encode())?,
                }
            } else {
                let frame = self.link.recv()?;
                match frame.kind {
                    FrameType::Batch => {
                        let (key, ack) = self.receive_cycle(frame)?;
                        let next = self.link.recv()?;
                        match next.kind {
                            FrameType::BatchAck => {
                                self.confirm(&next, &ack)?;
                                self.finish(key)?;
                            }
                            FrameType::Close => {
                                check_empty(&next)?;
                                self.finish(key)?;
                                return Ok(self.report(SessionEnd::Completed));
                            }
                            got => return Err(NetError::Unexpected { expected: FrameType::BatchAck, got }),
                        }
                    }
                    FrameType::Close => {
                        check_empty(&frame)?;
                        return Ok(self.report(SessionEnd::Completed));
                    }
                    FrameType::RekeyNeeded => {
                        let reason = decode_rekey(&frame.payload)?;
                        self.link.expect_close()?;
                        return Ok(self.report(SessionEnd::RekeyNeeded(reason)));
                    }
                    got => return Err(NetError::Unexpected { expected: FrameType::Batch, got }),
                }
            }
        }
    }
}

fn random_array<const N: usize>(entropy: &mut (impl EntropyStream + ?Sized)) -> Result<[u8; N], NetError> {
    let mut out = [0u8; N];
    entropy.try_fill(&mut out)?;
    Ok(out)
}

fn hello_for(session: &SessionState, cfg: &LinkConfig, nonce: [u8; 16]) -> HelloPayload {
    let n_b = if session.shuffle().is_enabled() { session.shuffle().selector_bits() } else { 0 };
    HelloPayload::new(session.params(), n_b, cfg.key_id, nonce)
}

fn check_wire_profile(session: &SessionState) -> Result<(), NetError> {
    let adc = session.params().adc_bits();
    if adc > WIRE_ADC_BITS {
        return Err(NetError::WireProfile(adc));
    }
    Ok(())
}

/// Runs the initiating side: handshake, then `cycles` cycles unless the
/// session hits its budget first. On error the session keeps the state of
/// the last completed cycle, except that a batch already on the wire stays
/// charged to the ledger.
pub fn run_initiator<T, E>(
    io: &mut T,
    session: &mut SessionState,
    cfg: &LinkConfig,
    cycles: u32,
    entropy: &mut E,
    capture: Option<&mut Capture>,
) -> Result<SessionReport, NetError>
where
    T: Transport + ?Sized,
    E: EntropyStream + ?Sized,
{
    check_wire_profile(session)?;
    io.set_deadline(cfg.deadline).map_err(NetError::from_io)?;
    let session_id = random_array::<16>(entropy)?;
    let nonce = random_array::<16>(entropy)?;
    let hello = hello_for(session, cfg, nonce);
    let mut link = Link { io, session_id, capture };
    let handshake = (|| {
        link.send(FrameType::Hello, hello.encode())?;
        let frame = link.expect(FrameType::HelloAck)?;
        let peer = HelloPayload::decode(frame.kind, &frame.payload)?;
        if !hello.agrees_with(&peer) {
            return Err(NetError::Handshake("responder parameters or key differ".into()));
        }
        Ok(peer.nonce)
    })();
    let responder_nonce = match handshake {
        Ok(nonce) => nonce,
        Err(e) => {
            link.report(&e);
            return Err(e);
        }
    };
    let ack = AckContext { session_id, initiator_nonce: nonce, responder_nonce };
    let mut driver = Driver { link, session, cfg, entropy, ack, cycles: 0 };
    let result = driver.initiator_loop(cycles);
    if let Err(e) = &result {
        driver.link.report(e);
    }
    result
}

/// Reads the opening HELLO on an accepted connection.
pub fn read_hello<T: Transport + ?Sized>(
    io: &mut T,
    deadline: Duration,
    mut capture: Option<&mut Capture>,
) -> Result<IncomingHello, NetError> {
    io.set_deadline(deadline).map_err(NetError::from_io)?;
    let frame = match read_frame(io) {
        Ok(frame) => frame,
        Err(ReadError::Io(e)) => return Err(NetError::from_io(e)),
        Err(ReadError::Frame(e)) => {
            let err = NetError::Frame(e);
            Link { io, session_id: [0; 16], capture: None }.report(&err);
            return Err(err);
        }
    };
    if let Some(capture) = capture.as_deref_mut() {
        capture.record_frame(&encode_frame(&frame));
    }
    let session_id = frame.session_id;
    let parsed = if frame.kind == FrameType::Hello {
        HelloPayload::decode(frame.kind, &frame.payload).map_err(NetError::from)
    } else {
        Err(NetError::Unexpected { expected: FrameType::Hello, got: frame.kind })
    };
    match parsed {
        Ok(hello) => Ok(IncomingHello { session_id, hello }),
        Err(err) => {
            Link { io, session_id, capture: None }.report(&err);
            Err(err)
        }
    }
}

/// Refuses a HELLO, e.g. when no local key matches its key id.
pub fn reject_hello<T: Transport + ?Sized>(io: &mut T, incoming: &IncomingHello, reason: &str) -> NetError {
    let err = NetError::Handshake(reason.to_string());
    Link { io, session_id: incoming.session_id, capture: None }.report(&err);
    err
}

/// Runs the responding side after [`read_hello`].
pub fn run_responder<T, E>(
    io: &mut T,
    incoming: IncomingHello,
    session: &mut SessionState,
    cfg: &LinkConfig,
    entropy: &mut E,
    capture: Option<&mut Capture>,
) -> Result<SessionReport, NetError>
where
    T: Transport + ?Sized,
    E: EntropyStream + ?Sized,
{
    io.set_deadline(cfg.deadline).map_err(NetError::from_io)?;
    let mut link = Link { io, session_id: incoming.session_id, capture };
    let handshake = (|| {
        check_wire_profile(session)?;
        let nonce = random_array::<16>(entropy)?;
        let ours = hello_for(session, cfg, nonce);
        if !ours.agrees_with(&incoming.hello) {
            return Err(NetError::Handshake("initiator parameters or key differ".into()));
        }
        link.send(FrameType::HelloAck, ours.encode())?;
        Ok(nonce)
    })();
    let responder_nonce = match handshake {
        Ok(nonce) => nonce,
        Err(e) => {
            link.report(&e);
            return Err(e);
        }
    };
    let ack = AckContext { session_id: incoming.session_id, initiator_nonce: incoming.hello.nonce, responder_nonce };
    let mut driver = Driver { link, session, cfg, entropy, ack, cycles: 0 };
    let result = driver.responder_loop();
    if let Err(e) = &result {
        driver.link.report(e);
    }
    result
}

/// [`read_hello`] followed by [`run_responder`] with a single known key.
pub fn respond<T, E>(
    io: &mut T,
    session: &mut SessionState,
    cfg: &LinkConfig,
    entropy: &mut E,
    mut capture: Option<&mut Capture>,
) -> Result<SessionReport, NetError>
where
    T: Transport + ?Sized,
    E: EntropyStream + ?Sized,
{
    let incoming = read_hello(io, cfg.deadline, capture.as_deref_mut())?;
    run_responder(io, incoming, session, cfg, entropy, capture)
}

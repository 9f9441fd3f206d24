use std::sync::Arc;
use std::thread;

use crate::entropy::EntropyStream;
use crate::protocol::SessionState;
use crate::transcript::Capture;

use super::session::{respond, run_initiator, LinkConfig, SessionReport};
use super::transport::{mem_pipe, mem_pipe_with_tamper, Tamper};
use super::NetError;

#[derive(Debug)]
pub struct PairOutcome {
    pub initiator: Result<SessionReport, NetError>,
    pub responder: Result<SessionReport, NetError>,
}

impl PairOutcome {
    pub fn is_ok(&self) -> bool {
        self.initiator.is_ok() && self.responder.is_ok()
    }
}

/// Runs both ends of a session over an in-process pipe, the responder on
/// a scoped thread. The capture, if any, is the initiator's view, which
/// holds every frame of the session.
#[allow(clippy::too_many_arguments)]
pub fn run_pair<EA, EB>(
    initiator: &mut SessionState,
    responder: &mut SessionState,
    initiator_cfg: &LinkConfig,
    responder_cfg: &LinkConfig,
    cycles: u32,
    mut initiator_entropy: EA,
    mut responder_entropy: EB,
    capture: Option<&mut Capture>,
    tamper: Option<Arc<Tamper>>,
) -> PairOutcome
where
    EA: EntropyStream,
    EB: EntropyStream + Send,
{
    let (mut a, mut b) = match tamper {
        Some(t) => mem_pipe_with_tamper(t),
        None => mem_pipe(),
    };
    thread::scope(|scope| {
        let handle = scope.spawn(move || {
            let result = respond(&mut b, responder, responder_cfg, &mut responder_entropy, None);
            drop(b);
            result
        });
        let initiator =
            run_initiator(&mut a, initiator, initiator_cfg, cycles, &mut initiator_entropy, capture);
        drop(a);
        let responder = handle.join().expect("responder thread panicked");
        PairOutcome { initiator, responder }
    })
}

use std::io::{self, Read, Write};
use std::net::TcpStream;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::time::Duration;

/// A reliable ordered byte stream with per-read deadlines.
pub trait Transport: Read + Write {
    fn set_deadline(&mut self, deadline: Duration) -> io::Result<()>;
}

impl Transport for TcpStream {
    fn set_deadline(&mut self, deadline: Duration) -> io::Result<()> {
        self.set_read_timeout(Some(deadline))?;
        self.set_write_timeout(Some(deadline))
    }
}

impl<T: Transport + ?Sized> Transport for &mut T {
    fn set_deadline(&mut self, deadline: Duration) -> io::Result<()> {
        (**self).set_deadline(deadline)
    }
}

/// Flips one byte at a fixed offset of the combined traffic of a pipe pair,
/// counting bytes in the order they are written by either end.
#[derive(Debug)]
pub struct Tamper {
    offset: u64,
    mask: u8,
    written: Mutex<u64>,
}

impl Tamper {
    pub fn new(offset: u64, mask: u8) -> Arc<Self> {
        assert_ne!(mask, 0, "a zero mask changes nothing");
        Arc::new(Self { offset, mask, written: Mutex::new(0) })
    }

    fn apply(&self, chunk: &mut [u8]) {
        let mut written = self.written.lock().expect("tamper lock");
        let start = *written;
        *written += chunk.len() as u64;
        if (start..*written).contains(&self.offset) {
            chunk[(self.offset - start) as usize] ^= self.mask;
        }
    }

    pub fn bytes_seen(&self) -> u64 {
        *self.written.lock().expect("tamper lock")
    }
}

/// In-process stream end. Each `write` call is delivered as one chunk.
#[derive(Debug)]
pub struct MemPipe {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    pending: Vec<u8>,
    pos: usize,
    deadline: Option<Duration>,
    tamper: Option<Arc<Tamper>>,
}

pub fn mem_pipe() -> (MemPipe, MemPipe) {
    pipe_pair(None)
}

pub fn mem_pipe_with_tamper(tamper: Arc<Tamper>) -> (MemPipe, MemPipe) {
    pipe_pair(Some(tamper))
}

fn pipe_pair(tamper: Option<Arc<Tamper>>) -> (MemPipe, MemPipe) {
    let (a_tx, b_rx) = mpsc::channel();
    let (b_tx, a_rx) = mpsc::channel();
    let end = |tx, rx| MemPipe { tx, rx, pending: Vec::new(), pos: 0, deadline: None, tamper: tamper.clone() };
    (end(a_tx, a_rx), end(b_tx, b_rx))
}

impl Read for MemPipe {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        if buf.is_empty() {
            return Ok(0);
        }
        if self.pos == self.pending.len() {
            let chunk = match self.deadline {
                Some(d) => match self.rx.recv_timeout(d) {
                    Ok(chunk) => chunk,
                    Err(RecvTimeoutError::Timeout) => return Err(io::ErrorKind::TimedOut.into()),
                    Err(RecvTimeoutError::Disconnected) => return Ok(0),
                },
                None => match self.rx.recv() {
                    Ok(chunk) => chunk,
                    Err(_) => return Ok(0),
                },
            };
            self.pending = chunk;
            self.pos = 0;
        }
        let n = buf.len().min(self.pending.len() - self.pos);
        buf[..n].copy_from_slice(&self.pending[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

impl Write for MemPipe {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let mut chunk = buf.to_vec();
        if let Some(tamper) = &self.tamper {
            tamper.apply(&mut chunk);
        }
        self.tx.send(chunk).map_err(|_| io::Error::from(io::ErrorKind::BrokenPipe))?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl Transport for MemPipe {
    fn set_deadline(&mut self, deadline: Duration) -> io::Result<()> {
        self.deadline = Some(deadline);
        Ok(())
    }
}

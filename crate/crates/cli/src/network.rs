use std::collections::HashMap;
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use notp_core::net::{read_hello, reject_hello, run_initiator, run_responder, LinkConfig, SessionReport};
use notp_core::protocol::{init_session, InitOptions, Role, SessionState};
use notp_core::transcript::Capture;
use notp_core::KeyBuffer;

use crate::config::Config;
use crate::exit::Failure;
use crate::files;
use crate::simulate::{check_requested, session_summary};

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Sessions to accept before exiting
    #[arg(long, default_value_t = 1)]
    pub sessions: usize,
    /// Replace existing key exports
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug)]
pub struct ConnectArgs {
    /// Replace existing key exports
    #[arg(long)]
    pub force: bool,
}

fn new_session(config: &Config, genesis: KeyBuffer, role: Role) -> Result<SessionState> {
    Ok(init_session(genesis, config.params()?, config.shuffle()?, role, InitOptions::default())?)
}

fn link_config(config: &Config, key_id: [u8; 32]) -> LinkConfig {
    let mut link = LinkConfig::new(key_id, config.batch);
    link.deadline = config.deadline;
    link
}

struct Outputs {
    index: usize,
    total: usize,
}

impl Outputs {
    fn finish(&self, config: &Config, state: &SessionState, report: &SessionReport, capture: &Capture, force: bool) -> Result<()> {
        let idx = |p: &PathBuf| files::indexed(p, self.index, self.total);
        let frames = config.capture.as_ref().map(idx);
        let truth = config.capture_truth.as_ref().map(idx);
        files::save_capture(frames.as_deref(), truth.as_deref(), capture)?;
        if let Some(path) = &config.out {
            files::export_key(&idx(path), &state.export_unspent(), force)?;
        }
        if self.total > 1 {
            println!("session={}", self.index);
        }
        print!("{}", session_summary(state, report));
        Ok(())
    }
}

fn wants_capture(config: &Config) -> bool {
    config.capture.is_some() || config.capture_truth.is_some()
}

pub fn serve(config: &Config, args: &ServeArgs) -> Result<()> {
    if config.keys.is_empty() {
        return Err(Failure::Usage("serve needs at least one --key".into()).into());
    }
    let mut keyring: HashMap<[u8; 32], Option<KeyBuffer>> = HashMap::new();
    for path in &config.keys {
        let (key, id) = files::load_genesis(path)?;
        keyring.insert(id, Some(key));
    }
    let listener = TcpListener::bind(&config.listen).with_context(|| format!("binding {}", config.listen))?;
    eprintln!("listening on {}", listener.local_addr()?);
    for index in 0..args.sessions {
        let (mut stream, peer) = listener.accept()?;
        eprintln!("session {index}: peer {peer}");
        stream.set_nodelay(true)?;
        let mut capture = Capture::default();
        let mut cap = wants_capture(config).then_some(&mut capture);
        let incoming = read_hello(&mut stream, config.deadline, cap.as_deref_mut())?;
        let key_id = incoming.hello.key_id;
        // A genesis key serves one session per run; reuse would repeat bases.
        let genesis = match keyring.get_mut(&key_id) {
            Some(slot) => match slot.take() {
                Some(key) => key,
                None => return Err(reject_hello(&mut stream, &incoming, "key already used in this run").into()),
            },
            None => return Err(reject_hello(&mut stream, &incoming, "unknown key id").into()),
        };
        let mut state = new_session(config, genesis, Role::Responder)?;
        let link = link_config(config, key_id);
        let mut entropy = config.entropy(2 * index as u64 + 1);
        let report = run_responder(&mut stream, incoming, &mut state, &link, &mut entropy, cap)?;
        Outputs { index, total: args.sessions }.finish(config, &state, &report, &capture, args.force)?;
    }
    Ok(())
}

fn dial(config: &Config) -> Result<TcpStream> {
    let peer = config.peer.as_deref().ok_or_else(|| Failure::Usage("connect needs --peer".into()))?;
    let addrs: Vec<_> = peer.to_socket_addrs().with_context(|| format!("resolving {peer}"))?.collect();
    let mut last = None;
    for addr in addrs {
        match TcpStream::connect_timeout(&addr, config.deadline) {
            Ok(stream) => {
                stream.set_nodelay(true)?;
                return Ok(stream);
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last.map_or_else(|| anyhow::anyhow!("{peer}: no addresses"), |e| anyhow::Error::new(e).context(format!("connecting to {peer}"))))
}

/// One session per key file, in order, each on a fresh connection.
pub fn connect(config: &Config, args: &ConnectArgs) -> Result<()> {
    if config.keys.is_empty() {
        return Err(Failure::Usage("connect needs --key".into()).into());
    }
    let total = config.keys.len();
    for (index, path) in config.keys.iter().enumerate() {
        let (genesis, key_id) = files::load_genesis(path)?;
        let mut state = new_session(config, genesis, Role::Initiator)?;
        let link = link_config(config, key_id);
        let mut stream = dial(config)?;
        let mut capture = Capture::default();
        let cap = wants_capture(config).then_some(&mut capture);
        let mut entropy = config.entropy(2 * index as u64);
        let report = run_initiator(&mut stream, &mut state, &link, config.cycles.unwrap_or(u32::MAX), &mut entropy, cap)?;
        Outputs { index, total }.finish(config, &state, &report, &capture, args.force)?;
        check_requested(&report, config.cycles)?;
    }
    Ok(())
}

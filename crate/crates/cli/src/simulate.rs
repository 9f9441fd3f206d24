use anyhow::Result;
use clap::Args;
use notp_core::keyfile;
use notp_core::net::{run_pair, LinkConfig, NetError, SessionEnd, SessionReport};
use notp_core::physics::phrg_bits;
use notp_core::protocol::{init_session, InitOptions, LeakageLedger, Role, SessionState};
use notp_core::transcript::Capture;
use notp_core::KeyOrigin;

use crate::config::Config;
use crate::exit::Failure;
use crate::files;

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Genesis length when no --key is given
    #[arg(long, default_value_t = 1024)]
    pub genesis_bits: usize,
    /// Override the emission budget of both parties
    #[arg(long)]
    pub budget: Option<u64>,
    /// Export the responder's unspent harvested key here
    #[arg(long, value_name = "PATH")]
    pub out_peer: Option<std::path::PathBuf>,
    /// Replace existing key exports
    #[arg(long)]
    pub force: bool,
    /// Run even when the operating condition fails
    #[arg(long)]
    pub allow_unsafe: bool,
}

pub fn describe_end(report: &SessionReport) -> &'static str {
    match report.end {
        SessionEnd::Completed => "completed",
        SessionEnd::RekeyNeeded(_) => "rekey-needed",
    }
}

pub fn session_summary(state: &SessionState, report: &SessionReport) -> String {
    let ledger = state.ledger();
    format!(
        "session_id={}\ncycles={}\nend={}\nemitted={}\ndiscarded={}\nbudget_remaining={}\nharvested_bits={}\n",
        hex::encode(report.session_id),
        report.cycles,
        describe_end(report),
        ledger.emitted(),
        ledger.discarded(),
        ledger.remaining(),
        state.harvested_unspent(),
    )
}

/// Turns a finished session into an error when fewer cycles than requested ran.
pub fn check_requested(report: &SessionReport, requested: Option<u32>) -> Result<()> {
    match (requested, report.end) {
        (Some(want), SessionEnd::RekeyNeeded(reason)) if report.cycles < want => Err(Failure::Rekey(format!(
            "rekey needed after {} of {want} cycles ({reason:?})",
            report.cycles
        ))
        .into()),
        _ => Ok(()),
    }
}

pub fn run(config: &Config, args: &SimulateArgs) -> Result<()> {
    let params = config.params()?;
    let shuffle = config.shuffle()?;
    let (genesis, key_id) = match config.keys.as_slice() {
        [] => {
            let mut key = phrg_bits(args.genesis_bits, &mut config.entropy(2))?;
            key.set_origin(KeyOrigin::Genesis);
            let id = keyfile::key_id(&keyfile::encode(&key, true)?);
            (key, id)
        }
        _ => files::load_genesis(config.single_key()?)?,
    };
    let options = InitOptions { allow_unsafe: args.allow_unsafe, ..InitOptions::default() };
    let mut a = init_session(genesis.clone(), params, shuffle.clone(), Role::Initiator, options)?;
    let mut b = init_session(genesis, params, shuffle, Role::Responder, options)?;
    if let Some(budget) = args.budget {
        a.set_ledger(LeakageLedger::with_budget(budget));
        b.set_ledger(LeakageLedger::with_budget(budget));
    }
    let mut link = LinkConfig::new(key_id, config.batch);
    link.deadline = config.deadline;
    let mut capture = Capture::default();
    let want_capture = config.capture.is_some() || config.capture_truth.is_some();
    let outcome = run_pair(
        &mut a,
        &mut b,
        &link,
        &link,
        config.cycles.unwrap_or(u32::MAX),
        config.entropy(0),
        config.entropy(1),
        want_capture.then_some(&mut capture),
        None,
    );
    if want_capture {
        files::save_capture(config.capture.as_deref(), config.capture_truth.as_deref(), &capture)?;
    }
    let report = match (outcome.initiator, outcome.responder) {
        (Ok(r), Ok(_)) => r,
        (Err(e), _) | (Ok(_), Err(e)) => return Err(e.into()),
    };
    let agree = a.export_unspent().bits() == b.export_unspent().bits();
    print!("{}", session_summary(&a, &report));
    println!("keys_agree={agree}");
    if !agree {
        return Err(NetError::Integrity(report.cycles).into());
    }
    if let Some(path) = &config.out {
        files::export_key(path, &a.export_unspent(), args.force)?;
    }
    if let Some(path) = &args.out_peer {
        files::export_key(path, &b.export_unspent(), args.force)?;
    }
    check_requested(&report, config.cycles)
}

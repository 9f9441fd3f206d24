use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use notp_core::analysis;
use notp_core::attacks::{
    self, basis_block_experiment, basis_block_reference, eavesdrop_experiment, kpa_campaign, params_tag, report_csv,
    run_kpa, score_recovery, KpaInput, KpaScenario, LeakedSelector, ReportRow,
};
use notp_core::protocol::shuffle::{select_permutation, unapply};
use notp_core::protocol::ShuffleConfig;
use notp_core::transcript::{parse_truth, CycleTruth, Transcript};
use notp_core::{Bit, EntropyStream, NoiseParams, PhaseSample};

use crate::config::Config;
use crate::exit::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttackKind {
    Eavesdrop,
    Kpa,
    BasisBlock,
}

#[derive(Args, Debug)]
pub struct AttackArgs {
    pub kind: AttackKind,
    /// Captured transcript to attack; without it a fresh experiment runs
    #[arg(long, value_name = "PATH", requires = "truth")]
    pub transcript: Option<PathBuf>,
    /// Ground-truth sidecar written alongside the transcript
    #[arg(long, value_name = "PATH")]
    pub truth: Option<PathBuf>,
    /// Trials (emissions, blocks, or scored key bits)
    #[arg(long)]
    pub trials: Option<u64>,
    /// Emissions per block for basis-block; defaults to floor(L)
    #[arg(long)]
    pub block_len: Option<usize>,
    /// Known plaintext for kpa on a transcript
    #[arg(long, value_name = "PATH")]
    pub plaintext: Option<PathBuf>,
    /// Ciphertext of the known plaintext for kpa on a transcript
    #[arg(long, value_name = "PATH")]
    pub ciphertext: Option<PathBuf>,
    /// Give the kpa attacker the shuffle selector
    #[arg(long)]
    pub leak_selector: bool,
    /// Enable the shuffle in kpa experiments
    #[arg(long)]
    pub defended: bool,
    /// Worker threads for experiments
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
}

struct Captured {
    params: NoiseParams,
    samples: Vec<(u32, Vec<PhaseSample>)>,
    truth: Vec<CycleTruth>,
}

fn load_captured(transcript: &PathBuf, truth: &PathBuf) -> Result<Captured> {
    let bytes = fs::read(transcript).with_context(|| format!("reading {}", transcript.display()))?;
    let parsed = Transcript::parse(&bytes)?;
    let text = fs::read_to_string(truth).with_context(|| format!("reading {}", truth.display()))?;
    let truth = parse_truth(&text)?;
    parsed.check_truth(&truth)?;
    Ok(Captured { params: parsed.params()?, samples: parsed.samples()?, truth })
}

fn ml_reference(params: &NoiseParams) -> Result<f64> {
    Ok(1.0 - analysis::classical_ml_error(params, 1)?)
}

fn eavesdrop(config: &Config, args: &AttackArgs) -> Result<ReportRow> {
    let (params, outcome) = match (&args.transcript, &args.truth) {
        (Some(t), Some(truth)) => {
            let cap = load_captured(t, truth)?;
            let samples: Vec<PhaseSample> = cap.samples.iter().flat_map(|(_, s)| s.iter().copied()).collect();
            let bits: Vec<Bit> = cap.truth.iter().flat_map(|t| t.data_bits.iter().copied()).collect();
            if samples.is_empty() {
                return Err(Failure::Usage("transcript holds no batches".into()).into());
            }
            (cap.params, attacks::eavesdrop_ml(&samples, &bits, &cap.params)?)
        }
        _ => {
            let params = config.params()?;
            let trials = args.trials.unwrap_or(100_000);
            (params, eavesdrop_experiment(&params, trials, config.seed_or_live(), args.workers))
        }
    };
    Ok(ReportRow { attack: "eavesdrop".into(), params: params_tag(&params), outcome, reference_value: ml_reference(&params)? })
}

fn basis_block(config: &Config, args: &AttackArgs) -> Result<ReportRow> {
    if args.transcript.is_some() {
        return Err(Failure::Usage("basis-block needs blocks with one fixed basis; it runs as an experiment only".into()).into());
    }
    let params = config.params()?;
    let block_len = match args.block_len {
        Some(n) => n,
        None => analysis::leak_report(&params, analysis::PROTOCOL_REPETITIONS)?.length_limit.floor() as usize,
    };
    if block_len == 0 {
        return Err(Failure::Usage("block length must be positive".into()).into());
    }
    let trials = args.trials.unwrap_or(1_000);
    let outcome = basis_block_experiment(&params, block_len, trials, config.seed_or_live(), args.workers);
    Ok(ReportRow {
        attack: format!("basis-block:{block_len}"),
        params: params_tag(&params),
        outcome,
        reference_value: basis_block_reference(&params, block_len),
    })
}

/// Key bits carried by a batch in unshuffled order.
fn unshuffled(truth: &CycleTruth, shuffle: &ShuffleConfig) -> Result<Vec<Bit>> {
    match truth.selector {
        None => Ok(truth.data_bits.clone()),
        Some(selector) => {
            if !shuffle.is_enabled() {
                return Err(Failure::Usage("truth records a shuffle; pass the same --shuffle-seed".into()).into());
            }
            let perm = select_permutation(selector, shuffle.list_seed(), truth.data_bits.len());
            Ok(unapply(&perm, &truth.data_bits))
        }
    }
}

fn kpa(config: &Config, args: &AttackArgs) -> Result<ReportRow> {
    let (params, outcome, defended) = match (&args.transcript, &args.truth) {
        (Some(t), Some(truth)) => {
            let (Some(p), Some(c)) = (&args.plaintext, &args.ciphertext) else {
                return Err(Failure::Usage("kpa on a transcript needs --plaintext and --ciphertext".into()).into());
            };
            let cap = load_captured(t, truth)?;
            let y2 = cap
                .samples
                .iter()
                .find(|(cycle, _)| *cycle == 1)
                .map(|(_, s)| s.as_slice())
                .ok_or_else(|| Failure::Usage("transcript has no second batch".into()))?;
            let truth2 = cap.truth.iter().find(|t| t.cycle == 1).expect("checked against transcript");
            let shuffle = config.shuffle()?;
            let plaintext = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            let ciphertext = fs::read(c).with_context(|| format!("reading {}", c.display()))?;
            let leaked_selector = match (args.leak_selector, truth2.selector) {
                (true, Some(selector)) => Some(LeakedSelector { selector, list_seed: *shuffle.list_seed() }),
                _ => None,
            };
            let input = KpaInput {
                params: cap.params,
                y2,
                known_plaintext: &plaintext,
                ciphertext: &ciphertext,
                leaked_selector,
            };
            let recovery = run_kpa(&input)?;
            let outcome = score_recovery(&recovery.k2, &unshuffled(truth2, &shuffle)?)?
                .ok_or_else(|| Failure::Usage("known plaintext too short to recover any basis bit".into()))?;
            (cap.params, outcome, truth2.selector.is_some() && !args.leak_selector)
        }
        _ => {
            let params = config.params()?;
            let seed = config.seed_or_live();
            let shuffle = if args.defended {
                match config.shuffle()? {
                    s if s.is_enabled() => s,
                    _ => {
                        let mut list_seed = [0u8; 32];
                        config.entropy(7).try_fill(&mut list_seed)?;
                        ShuffleConfig::enabled(config.nb, list_seed)?
                    }
                }
            } else {
                ShuffleConfig::disabled()
            };
            let scenario = KpaScenario {
                params,
                genesis_bits: 1024,
                batch: config.batch,
                shuffle,
                leak_selector: args.leak_selector,
            };
            let outcome = kpa_campaign(&scenario, args.trials.unwrap_or(10_000), seed)?;
            (params, outcome, args.defended && !args.leak_selector)
        }
    };
    Ok(ReportRow {
        attack: if defended { "kpa-defended".into() } else { "kpa".into() },
        params: params_tag(&params),
        outcome,
        reference_value: if defended { 0.5 } else { 1.0 },
    })
}

pub fn run(config: &Config, args: &AttackArgs) -> Result<()> {
    let row = match args.kind {
        AttackKind::Eavesdrop => eavesdrop(config, args)?,
        AttackKind::Kpa => kpa(config, args)?,
        AttackKind::BasisBlock => basis_block(config, args)?,
    };
    let csv = report_csv(&[row]);
    match &config.out {
        Some(path) => fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}

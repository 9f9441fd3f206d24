use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use clap::parser::ValueSource;
use clap::{ArgMatches, Args};
use notp_core::physics::{DeltaPhi, DEFAULT_ADC_BITS, DEFAULT_GUARD_RATIO};
use notp_core::protocol::shuffle::DEFAULT_SELECTOR_BITS;
use notp_core::protocol::ShuffleConfig;
use notp_core::{EntropyStream, NoiseParams, OsEntropy, SeededEntropy};
use sha2::{Digest, Sha256};

use crate::exit::Failure;

pub const DEFAULT_N_MEAN: f64 = 100.0;
pub const DEFAULT_DPHI_EXP: i8 = 11;
pub const DEFAULT_BATCH: usize = 256;
pub const DEFAULT_LISTEN: &str = "127.0.0.1:7878";
pub const DEFAULT_DEADLINE_MS: u64 = 30_000;

/// Settings shared by all subcommands. Each may also come from the
/// environment (where noted) or from the `--config` file.
#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Line-oriented key=value configuration file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Mean photon number of the source
    #[arg(long, global = true)]
    pub n_mean: Option<f64>,
    /// Basis spacing as an exponent m, spacing = 2^-m radians
    #[arg(long, global = true, conflicts_with = "dphi", allow_negative_numbers = true)]
    pub dphi_exp: Option<i8>,
    /// Basis spacing in radians
    #[arg(long, global = true)]
    pub dphi: Option<f64>,
    /// Sample quantization width in bits
    #[arg(long, global = true)]
    pub adc_bits: Option<u32>,
    /// Minimum ratio for the operating-condition check
    #[arg(long, global = true)]
    pub guard: Option<f64>,
    /// Shuffle selector width in bits (16..=64)
    #[arg(long, global = true)]
    pub nb: Option<u8>,
    /// File whose digest seeds the shuffle permutation list; enables the shuffle
    #[arg(long, global = true, value_name = "PATH")]
    pub shuffle_seed: Option<PathBuf>,
    /// Emissions per batch
    #[arg(long, global = true)]
    pub batch: Option<usize>,
    /// Number of cycles to run
    #[arg(long, global = true)]
    pub cycles: Option<u32>,
    /// Listen address for serve
    #[arg(long, global = true, env = "NOTP_LISTEN")]
    pub listen: Option<String>,
    /// Peer address for connect
    #[arg(long, global = true)]
    pub peer: Option<String>,
    /// Key file (repeat for serve to offer several)
    #[arg(long, global = true, env = "NOTP_KEYFILE", value_delimiter = ',')]
    pub key: Vec<PathBuf>,
    /// Deterministic entropy seed, for tests and reproducible runs
    #[arg(long, global = true, env = "NOTP_SEED")]
    pub seed: Option<u64>,
    /// Require live operating-system entropy
    #[arg(long, global = true)]
    pub live: bool,
    /// Write the session transcript here
    #[arg(long, global = true, value_name = "PATH")]
    pub capture: Option<PathBuf>,
    /// Write ground truth for the captured transcript here (contains key material)
    #[arg(long, global = true, value_name = "PATH")]
    pub capture_truth: Option<PathBuf>,
    /// Output path
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Per-frame network deadline in milliseconds
    #[arg(long, global = true)]
    pub deadline_ms: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Default,
    File,
    Env,
    Flag,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Default => "default",
            Source::File => "file",
            Source::Env => "env",
            Source::Flag => "flag",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyMode {
    Live,
    Seeded(u64),
}

#[derive(Debug, Clone)]
pub struct Config {
    pub n_mean: f64,
    pub dphi: DeltaPhi,
    pub adc_bits: u32,
    pub guard: f64,
    pub nb: u8,
    pub shuffle_seed: Option<PathBuf>,
    pub batch: usize,
    pub cycles: Option<u32>,
    pub listen: String,
    pub peer: Option<String>,
    pub keys: Vec<PathBuf>,
    pub entropy: EntropyMode,
    pub capture: Option<PathBuf>,
    pub capture_truth: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub deadline: Duration,
    sources: Vec<(&'static str, String, Source)>,
}

const FILE_KEYS: &[&str] = &[
    "n_mean",
    "dphi_exp",
    "dphi",
    "adc_bits",
    "guard",
    "nb",
    "shuffle_seed",
    "batch",
    "cycles",
    "listen",
    "peer",
    "key",
    "seed",
    "live",
    "capture",
    "capture_truth",
    "out",
    "deadline_ms",
];

/// Parses `key=value` lines; `#` starts a comment, dashes in keys are
/// read as underscores.
pub fn parse_config_file(text: &str) -> Result<HashMap<String, String>, Failure> {
    let mut out = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("config line {}: expected key=value", i + 1)))?;
        let key = k.trim().replace('-', "_");
        if !FILE_KEYS.contains(&key.as_str()) {
            return Err(Failure::Usage(format!("config line {}: unknown key `{key}`", i + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

struct Resolver<'a> {
    matches: &'a ArgMatches,
    file: HashMap<String, String>,
    sources: Vec<(&'static str, String, Source)>,
}

impl Resolver<'_> {
    fn cli_source(&self, id: &str) -> Source {
        match self.matches.value_source(id) {
            Some(ValueSource::EnvVariable) => Source::Env,
            _ => Source::Flag,
        }
    }

    fn file_value<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, Failure> {
        match self.file.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Failure::Usage(format!("config key `{key}`: cannot parse `{v}`"))),
        }
    }

    fn pick<T: Clone + fmt::Debug>(
        &mut self,
        name: &'static str,
        cli: Option<T>,
        file: Option<T>,
        default: Option<T>,
        show: impl Fn(&T) -> String,
    ) -> Option<T> {
        let (value, source) = match (cli, file, default) {
            (Some(v), _, _) => (Some(v), self.cli_source(name)),
            (None, Some(v), _) => (Some(v), Source::File),
            (None, None, d) => (d, Source::Default),
        };
        let shown = value.as_ref().map_or_else(|| "-".to_string(), &show);
        self.sources.push((name, shown, source));
        value
    }
}

fn show_path(p: &PathBuf) -> String {
    p.display().to_string()
}

impl Config {
    pub fn resolve(args: &CommonArgs, matches: &ArgMatches) -> Result<Config> {
        let file = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
                parse_config_file(&text)?
            }
            None => HashMap::new(),
        };
        let mut r = Resolver { matches, file, sources: Vec::new() };

        let n_mean = r.file_value("n_mean")?;
        let n_mean = r.pick("n_mean", args.n_mean, n_mean, Some(DEFAULT_N_MEAN), |v| v.to_string()).expect("default");

        let cli_dphi = match (args.dphi_exp, args.dphi) {
            (Some(m), _) => Some(DeltaPhi::Exponent(m)),
            (None, Some(x)) => Some(DeltaPhi::Radians(x)),
            (None, None) => None,
        };
        let file_dphi = match (r.file_value::<i8>("dphi_exp")?, r.file_value::<f64>("dphi")?) {
            (Some(_), Some(_)) => return Err(Failure::Usage("config sets both dphi_exp and dphi".into()).into()),
            (Some(m), None) => Some(DeltaPhi::Exponent(m)),
            (None, Some(x)) => Some(DeltaPhi::Radians(x)),
            (None, None) => None,
        };
        let dphi_id = if args.dphi.is_some() { "dphi" } else { "dphi_exp" };
        let dphi = r
            .pick(dphi_id, cli_dphi, file_dphi, Some(DeltaPhi::Exponent(DEFAULT_DPHI_EXP)), |d| match d {
                DeltaPhi::Exponent(m) => format!("2^-{m}"),
                DeltaPhi::Radians(x) => x.to_string(),
            })
            .expect("default");

        let adc = r.file_value("adc_bits")?;
        let adc_bits = r.pick("adc_bits", args.adc_bits, adc, Some(DEFAULT_ADC_BITS), |v| v.to_string()).expect("default");
        let guard = r.file_value("guard")?;
        let guard = r.pick("guard", args.guard, guard, Some(DEFAULT_GUARD_RATIO), |v| v.to_string()).expect("default");
        let nb = r.file_value("nb")?;
        let nb = r.pick("nb", args.nb, nb, Some(DEFAULT_SELECTOR_BITS), |v| v.to_string()).expect("default");
        let seed_path = r.file_value("shuffle_seed")?;
        let shuffle_seed = r.pick("shuffle_seed", args.shuffle_seed.clone(), seed_path, None, show_path);
        let batch = r.file_value("batch")?;
        let batch = r.pick("batch", args.batch, batch, Some(DEFAULT_BATCH), |v| v.to_string()).expect("default");
        let cycles = r.file_value("cycles")?;
        let cycles = r.pick("cycles", args.cycles, cycles, None, |v| v.to_string());
        let listen = r.file_value("listen")?;
        let listen = r
            .pick("listen", args.listen.clone(), listen, Some(DEFAULT_LISTEN.to_string()), String::clone)
            .expect("default");
        let peer = r.file_value("peer")?;
        let peer = r.pick("peer", args.peer.clone(), peer, None, String::clone);
        let file_keys = r.file.get("key").map(|v| v.split(',').map(|s| PathBuf::from(s.trim())).collect::<Vec<_>>());
        let cli_keys = (!args.key.is_empty()).then(|| args.key.clone());
        let keys = r
            .pick("key", cli_keys, file_keys, Some(Vec::new()), |v| {
                v.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",")
            })
            .expect("default");
        let seed = r.file_value("seed")?;
        let seed = r.pick("seed", args.seed, seed, None, |v| v.to_string());
        let live = args.live || r.file_value::<bool>("live")?.unwrap_or(false);
        let entropy = match (live, seed) {
            (true, Some(_)) => return Err(Failure::Usage("live entropy refuses --seed".into()).into()),
            (_, Some(s)) => EntropyMode::Seeded(s),
            (_, None) => EntropyMode::Live,
        };
        let capture = r.file_value("capture")?;
        let capture = r.pick("capture", args.capture.clone(), capture, None, show_path);
        let truth = r.file_value("capture_truth")?;
        let capture_truth = r.pick("capture_truth", args.capture_truth.clone(), truth, None, show_path);
        let out = r.file_value("out")?;
        let out = r.pick("out", args.out.clone(), out, None, show_path);
        let deadline = r.file_value("deadline_ms")?;
        let deadline_ms =
            r.pick("deadline_ms", args.deadline_ms, deadline, Some(DEFAULT_DEADLINE_MS), |v| v.to_string()).expect("default");

        Ok(Config {
            n_mean,
            dphi,
            adc_bits,
            guard,
            nb,
            shuffle_seed,
            batch,
            cycles,
            listen,
            peer,
            keys,
            entropy,
            capture,
            capture_truth,
            out,
            deadline: Duration::from_millis(deadline_ms),
            sources: r.sources,
        })
    }

    /// One line per setting with where it came from. Carries no key material.
    pub fn describe(&self) -> String {
        let mut out = String::from("effective config:\n");
        for (name, value, source) in &self.sources {
            out.push_str(&format!("  {name} = {value} ({source})\n"));
        }
        let entropy = match self.entropy {
            EntropyMode::Live => "live".to_string(),
            EntropyMode::Seeded(s) => format!("seeded({s})"),
        };
        out.push_str(&format!("  entropy = {entropy}\n"));
        out
    }

    pub fn params(&self) -> Result<NoiseParams> {
        NoiseParams::with_guard(self.n_mean, self.dphi, self.adc_bits, self.guard)
            .map_err(|e| Failure::Usage(format!("invalid parameters: {e}")).into())
    }

    pub fn shuffle(&self) -> Result<ShuffleConfig> {
        match &self.shuffle_seed {
            None => Ok(ShuffleConfig::disabled()),
            Some(path) => {
                let list_seed = read_list_seed(path)?;
                ShuffleConfig::enabled(self.nb, list_seed).map_err(|e| Failure::Usage(e.to_string()).into())
            }
        }
    }

    /// Independent stream `index` of the configured entropy source.
    pub fn entropy(&self, index: u64) -> Box<dyn EntropyStream + Send> {
        match self.entropy {
            EntropyMode::Live => Box::new(OsEntropy),
            EntropyMode::Seeded(seed) => Box::new(SeededEntropy::substream(seed, index)),
        }
    }

    pub fn seed_or_live(&self) -> u64 {
        match self.entropy {
            EntropyMode::Seeded(seed) => seed,
            EntropyMode::Live => {
                let mut bytes = [0u8; 8];
                OsEntropy.try_fill(&mut bytes).expect("operating-system entropy");
                u64::from_le_bytes(bytes)
            }
        }
    }

    pub fn single_key(&self) -> Result<&Path> {
        match self.keys.as_slice() {
            [one] => Ok(one),
            [] => Err(Failure::Usage("a key file is required (--key or NOTP_KEYFILE)".into()).into()),
            _ => Err(Failure::Usage("exactly one key file expected".into()).into()),
        }
    }
}

fn read_list_seed(path: &Path) -> Result<[u8; 32]> {
    let bytes = fs::read(path).with_context(|| format!("reading shuffle seed {}", path.display()))?;
    if bytes.len() < 16 {
        return Err(Failure::Usage("shuffle seed file must hold at least 16 bytes".into()).into());
    }
    Ok(Sha256::digest(&bytes).into())
}

use std::fs;

use anyhow::{Context, Result};
use clap::Args;
use notp_core::analysis::{self, format_sig, PROTOCOL_REPETITIONS};
use notp_core::physics::{self, DeltaPhi};
use notp_core::NoiseParams;

use crate::config::Config;
use crate::exit::Failure;

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Single point as key=value tokens: n=, dphi-exp=, dphi=, adc=, guard=
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    pub point: Option<Vec<String>>,
    /// Comma-separated mean photon numbers for the grid
    #[arg(long, value_delimiter = ',', default_value = "20,50,100,200,500")]
    pub n_values: Vec<f64>,
    /// Comma-separated spacing exponents for the grid
    #[arg(long, value_delimiter = ',', default_value = "7,8,9,10,11", conflicts_with = "dphi_values")]
    pub dphi_exps: Vec<i8>,
    /// Comma-separated spacings in radians for the grid
    #[arg(long, value_delimiter = ',')]
    pub dphi_values: Option<Vec<f64>>,
    /// Transmissions per bit assumed for the eavesdropper
    #[arg(long, default_value_t = PROTOCOL_REPETITIONS)]
    pub repetitions: u32,
}

fn point_params(config: &Config, tokens: &[String]) -> Result<NoiseParams> {
    let mut n = config.n_mean;
    let mut dphi = config.dphi;
    let mut adc = config.adc_bits;
    let mut guard = config.guard;
    let bad = |t: &str| Failure::Usage(format!("bad --point token `{t}`"));
    for token in tokens.iter().flat_map(|t| t.split_whitespace()) {
        let (k, v) = token.split_once('=').ok_or_else(|| bad(token))?;
        match k.replace('_', "-").as_str() {
            "n" | "n-mean" => n = v.parse().map_err(|_| bad(token))?,
            "dphi-exp" => dphi = DeltaPhi::Exponent(v.parse().map_err(|_| bad(token))?),
            "dphi" => dphi = DeltaPhi::Radians(v.parse().map_err(|_| bad(token))?),
            "adc" | "adc-bits" => adc = v.parse().map_err(|_| bad(token))?,
            "guard" => guard = v.parse().map_err(|_| bad(token))?,
            _ => return Err(bad(token).into()),
        }
    }
    NoiseParams::with_guard(n, dphi, adc, guard).map_err(|e| Failure::Usage(format!("invalid point: {e}")).into())
}

fn point_report(params: &NoiseParams, repetitions: u32) -> Result<String> {
    let leak = analysis::leak_report(params, repetitions)?;
    let cond = analysis::check_condition(params);
    let lines = [
        ("n_mean", format_sig(params.mean_photon_number())),
        ("delta_phi", format_sig(params.delta_phi())),
        ("sigma_phi", format_sig(physics::sigma_phi(params))),
        ("overlap_exact", format_sig(physics::state_overlap(params, true))),
        ("overlap_approx", format_sig(physics::state_overlap(params, false))),
        ("p_error", format_sig(leak.p_error)),
        ("p_success", format_sig(leak.p_success)),
        ("delta_h", format_sig(leak.delta_h)),
        ("length_limit", format_sig(leak.length_limit)),
        ("classical_ml_error", format_sig(analysis::classical_ml_error(params, 1)?)),
        ("ratio_left", format_sig(cond.ratio_left)),
        ("ratio_right", format_sig(cond.ratio_right)),
        ("condition", if cond.pass { "pass".into() } else { "fail".into() }),
    ];
    Ok(lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect())
}

pub fn run(config: &Config, args: &AnalyzeArgs) -> Result<()> {
    let text = match &args.point {
        Some(tokens) => point_report(&point_params(config, tokens)?, args.repetitions)?,
        None => {
            let dphis: Vec<DeltaPhi> = match &args.dphi_values {
                Some(v) => v.iter().map(|&x| DeltaPhi::Radians(x)).collect(),
                None => args.dphi_exps.iter().map(|&m| DeltaPhi::Exponent(m)).collect(),
            };
            if args.n_values.is_empty() || dphis.is_empty() {
                return Err(Failure::Usage("grid needs at least one value on each axis".into()).into());
            }
            if args.n_values.iter().any(|&n| !(n > 0.0)) {
                return Err(Failure::Usage("photon numbers must be positive".into()).into());
            }
            let points = analysis::grid(&args.n_values, &dphis, config.adc_bits, config.guard);
            analysis::sweep_csv(&analysis::sweep(&points, args.repetitions))
        }
    };
    match &config.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

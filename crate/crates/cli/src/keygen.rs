use anyhow::Result;
use clap::Args;
use notp_core::keyfile;
use notp_core::physics::phrg_bits;
use notp_core::protocol::MIN_GENESIS_BITS;
use notp_core::KeyOrigin;

use crate::config::Config;
use crate::exit::Failure;

#[derive(Args, Debug)]
pub struct KeygenArgs {
    /// Key length in bits
    #[arg(long, default_value_t = 1024)]
    pub bits: usize,
    /// Replace an existing file
    #[arg(long)]
    pub force: bool,
}

pub fn run(config: &Config, args: &KeygenArgs) -> Result<()> {
    if args.bits < MIN_GENESIS_BITS {
        return Err(Failure::Usage(format!("key length must be at least {MIN_GENESIS_BITS} bits")).into());
    }
    let out = config.out.as_ref().ok_or_else(|| Failure::Usage("keygen needs --out".into()))?;
    let mut key = phrg_bits(args.bits, &mut config.entropy(0))?;
    key.set_origin(KeyOrigin::Genesis);
    let encoded = keyfile::encode(&key, true)?;
    keyfile::write_key_file(out, &encoded, args.force)?;
    println!("key_id={}", hex::encode(keyfile::key_id(&encoded)));
    println!("bits={}", args.bits);
    Ok(())
}

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use notp_core::keyfile;
use notp_core::protocol::{mac_tag, mac_verify, otp_encrypt, SecretSource};
use notp_core::{KeyBuffer, KeyOrigin};
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::config::Config;
use crate::exit::Failure;

pub const SPENT_HEADER: &str = "notp-spent v1";

#[derive(Args, Debug)]
pub struct PadArgs {
    /// Input file
    pub input: PathBuf,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Message file
    pub input: PathBuf,
    /// 32-byte tag file
    #[arg(long, value_name = "PATH")]
    pub tag: PathBuf,
}

pub fn sidecar_path(key: &Path) -> PathBuf {
    let mut name = key.as_os_str().to_owned();
    name.push(".spent");
    PathBuf::from(name)
}

fn spent_body(key_id: &[u8; 32], watermark: usize) -> String {
    format!("key_id={}\nwatermark={watermark}\n", hex::encode(key_id))
}

fn render_spent(key_id: &[u8; 32], watermark: usize) -> String {
    let body = spent_body(key_id, watermark);
    let check = hex::encode(Sha256::digest(body.as_bytes()));
    format!("{SPENT_HEADER}\n{body}check={check}\n")
}

fn parse_spent(text: &str, key_id: &[u8; 32]) -> Result<usize, Failure> {
    let bad = |why: &str| Failure::Integrity(format!("spend sidecar corrupt: {why}"));
    let mut lines = text.lines();
    if lines.next() != Some(SPENT_HEADER) {
        return Err(bad("bad header"));
    }
    let mut field = |name: &str| {
        lines
            .next()
            .and_then(|l| l.strip_prefix(name))
            .and_then(|l| l.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| bad(&format!("missing {name}")))
    };
    let id = field("key_id")?;
    let watermark: usize = field("watermark")?.parse().map_err(|_| bad("watermark"))?;
    let check = field("check")?;
    if lines.next().is_some() {
        return Err(bad("trailing data"));
    }
    if hex::encode(Sha256::digest(spent_body(key_id, watermark).as_bytes())) != check {
        return Err(bad("checksum"));
    }
    if id != hex::encode(key_id) {
        return Err(Failure::Integrity("spend sidecar belongs to a different key".into()));
    }
    Ok(watermark)
}

/// A key file plus its persisted spend watermark.
struct PadKey {
    key: KeyBuffer,
    key_id: [u8; 32],
    sidecar: PathBuf,
}

impl PadKey {
    fn open(path: &Path) -> Result<Self> {
        let (mut key, key_id) = keyfile::read_key_file(path, KeyOrigin::Imported)
            .with_context(|| format!("loading key {}", path.display()))?;
        let sidecar = sidecar_path(path);
        let watermark = match fs::read_to_string(&sidecar) {
            Ok(text) => parse_spent(&text, &key_id)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => 0,
            Err(e) => return Err(anyhow::Error::new(e).context(format!("reading {}", sidecar.display()))),
        };
        if key.take(watermark).is_none() {
            return Err(Failure::Integrity(format!("spend watermark {watermark} exceeds key length {}", key.len())).into());
        }
        Ok(Self { key, key_id, sidecar })
    }

    /// Writes the current watermark via a temporary file and rename.
    fn persist(&self) -> Result<()> {
        let dir = self.sidecar.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut tmp = NamedTempFile::new_in(dir)?;
        tmp.write_all(render_spent(&self.key_id, self.key.watermark()).as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(&self.sidecar).map_err(|e| e.error)?;
        Ok(())
    }
}

/// Runs `op` against the unspent key bits and records the spend before any
/// output is written.
fn spend<T>(config: &Config, op: impl FnOnce(&mut KeyBuffer) -> Result<T>) -> Result<T> {
    let mut pad = PadKey::open(config.single_key()?)?;
    let before = pad.key.watermark();
    let out = op(&mut pad.key)?;
    if pad.key.watermark() != before {
        pad.persist()?;
    }
    Ok(out)
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write_output(config: &Config, bytes: &[u8]) -> Result<()> {
    let out = config.out.as_ref().ok_or_else(|| Failure::Usage("--out is required".into()))?;
    fs::write(out, bytes).with_context(|| format!("writing {}", out.display()))
}

pub fn encrypt(config: &Config, args: &PadArgs) -> Result<()> {
    config.out.as_ref().ok_or_else(|| Failure::Usage("--out is required".into()))?;
    let message = read_input(&args.input)?;
    let (ciphertext, remaining) = spend(config, |key| Ok((otp_encrypt(&message, key)?, key.unspent_bits())))?;
    write_output(config, &ciphertext)?;
    println!("bits_used={}", message.len() * 8);
    println!("bits_remaining={remaining}");
    Ok(())
}

/// XOR is its own inverse; decryption spends the mirrored bits of the peer's key.
pub fn decrypt(config: &Config, args: &PadArgs) -> Result<()> {
    encrypt(config, args)
}

pub fn tag(config: &Config, args: &PadArgs) -> Result<()> {
    let message = read_input(&args.input)?;
    let tag = spend(config, |key| Ok(mac_tag(&message, key)?))?;
    match &config.out {
        Some(_) => write_output(config, &tag)?,
        None => println!("{}", hex::encode(tag)),
    }
    Ok(())
}

pub fn verify(config: &Config, args: &VerifyArgs) -> Result<()> {
    let message = read_input(&args.input)?;
    let raw = read_input(&args.tag)?;
    let tag: [u8; 32] = match raw.len() {
        32 => raw.try_into().expect("32 bytes"),
        _ => {
            let text = String::from_utf8_lossy(&raw);
            hex::decode(text.trim())
                .ok()
                .and_then(|v| v.try_into().ok())
                .ok_or_else(|| Failure::Usage("tag must be 32 raw bytes or 64 hex digits".into()))?
        }
    };
    if spend(config, |key| Ok(mac_verify(&message, &tag, key)?))? {
        println!("ok");
        Ok(())
    } else {
        Err(Failure::Integrity("tag mismatch".into()).into())
    }
}

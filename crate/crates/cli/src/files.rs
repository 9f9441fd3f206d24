use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use notp_core::keyfile::{self, KeyFileError};
use notp_core::transcript::{render_truth, Capture};
use notp_core::KeyBuffer;

/// Writes a file readable only by its owner, replacing any previous one.
pub fn write_private(path: &Path, bytes: &[u8]) -> Result<()> {
    if path.exists() {
        fs::remove_file(path).with_context(|| format!("replacing {}", path.display()))?;
    }
    let mut options = OpenOptions::new();
    options.write(true).create_new(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        options.mode(0o600);
    }
    let mut file = options.open(path).with_context(|| format!("creating {}", path.display()))?;
    file.write_all(bytes)?;
    file.sync_all()?;
    Ok(())
}

/// Exports key bits to a read-only key file and returns its key id.
pub fn export_key(path: &Path, key: &KeyBuffer, overwrite: bool) -> Result<[u8; 32]> {
    let encoded = keyfile::encode(key, false)?;
    keyfile::write_key_file(path, &encoded, overwrite).map_err(|e| match e {
        KeyFileError::Exists(p) => anyhow::anyhow!("{p} already exists (use --force to replace)"),
        other => other.into(),
    })?;
    Ok(keyfile::key_id(&encoded))
}

pub fn save_capture(frames_path: Option<&Path>, truth_path: Option<&Path>, capture: &Capture) -> Result<()> {
    if let Some(path) = frames_path {
        fs::write(path, &capture.frames).with_context(|| format!("writing transcript {}", path.display()))?;
    }
    if let Some(path) = truth_path {
        write_private(path, render_truth(&capture.truth).as_bytes())?;
    }
    Ok(())
}

/// `path` itself for a single session, `path.N` for session N of several.
pub fn indexed(path: &Path, index: usize, total: usize) -> PathBuf {
    if total <= 1 {
        path.to_path_buf()
    } else {
        let mut name = path.as_os_str().to_owned();
        name.push(format!(".{index}"));
        PathBuf::from(name)
    }
}

/// Reads a genesis key file and returns the key with its id.
pub fn load_genesis(path: &Path) -> Result<(KeyBuffer, [u8; 32])> {
    keyfile::read_key_file(path, notp_core::KeyOrigin::Genesis)
        .with_context(|| format!("loading key {}", path.display()))
}

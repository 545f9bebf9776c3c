//! Sidecar stamps tying every artifact to the manifest that produced it.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamp {
    pub manifest_hash: String,
    pub stage: String,
    pub sha256: String,
}

pub fn stamp_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    artifact.with_file_name(name)
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

/// Records which manifest and stage wrote `artifact`, with its digest.
pub fn stamp(artifact: &Path, stage: &str, manifest_hash: &str) -> Result<()> {
    let s = Stamp {
        manifest_hash: manifest_hash.to_string(),
        stage: stage.to_string(),
        sha256: file_sha256(artifact)?,
    };
    let path = stamp_path(artifact);
    std::fs::write(&path, serde_json::to_string_pretty(&s)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

/// Checks that an upstream artifact exists, is unmodified since it was
/// stamped, and belongs to the current manifest.
pub fn require(artifact: &Path, what: &str, manifest_hash: &str) -> Result<()> {
    if !artifact.exists() {
        bail!("missing {what} ({})", artifact.display());
    }
    let sp = stamp_path(artifact);
    let text = std::fs::read_to_string(&sp).map_err(|_| anyhow!("missing stamp for {what} ({})", sp.display()))?;
    let s: Stamp = serde_json::from_str(&text).with_context(|| format!("parsing {}", sp.display()))?;
    if s.sha256 != file_sha256(artifact)? {
        bail!("stale {what}: {} changed after stage `{}` wrote it", artifact.display(), s.stage);
    }
    if s.manifest_hash != manifest_hash {
        bail!(
            "{what} ({}) was produced under manifest {} but the current manifest is {}",
            artifact.display(),
            short(&s.manifest_hash),
            short(manifest_hash)
        );
    }
    Ok(())
}

fn short(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Context;
use crate::error::{IoContext, Result};
use crate::run::{file_digest, load_manifest, RunDir, CONFIG_FILE, MANIFEST_FILE, STAGES};

pub const BUNDLE_DIR: &str = "bundle";
pub const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleIndex {
    pub complete: bool,
    pub missing_stages: Vec<String>,
    pub config_hash: String,
    pub toolkit_version: String,
    pub files: Vec<BundleEntry>,
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if !dir.is_dir() {
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .at(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()
        .at(dir)?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// Copies reports, image dumps, the config and the manifest into
/// `bundle/` and indexes them. The bundle is rebuilt from scratch, so
/// emitting twice from an unchanged run directory gives identical bytes.
pub fn emit_reports(ctx: &Context) -> Result<BundleIndex> {
    let run = &ctx.run;
    let manifest = load_manifest(run)?;
    let missing_stages: Vec<String> = STAGES
        .iter()
        .filter(|(name, proof)| !manifest.stages.contains_key(*name) || !run.path(proof).exists())
        .map(|(name, _)| name.to_string())
        .collect();

    let mut sources = vec![run.path(CONFIG_FILE), run.path(MANIFEST_FILE)];
    walk(&run.path("reports"), &mut sources)?;
    walk(&run.path("images"), &mut sources)?;

    let bundle = RunDir::new(run.path(BUNDLE_DIR));
    if bundle.root().exists() {
        std::fs::remove_dir_all(bundle.root()).at(bundle.root())?;
    }
    let mut files = Vec::with_capacity(sources.len());
    for src in sources.iter().filter(|p| p.exists()) {
        let rel = run.relative(src);
        let bytes = std::fs::read(src).at(src)?;
        let dest = bundle.path(&rel);
        bundle.write(&dest, &bytes)?;
        files.push(BundleEntry {
            sha256: file_digest(&dest)?,
            bytes: bytes.len() as u64,
            path: rel,
        });
    }
    let index = BundleIndex {
        complete: missing_stages.is_empty(),
        missing_stages,
        config_hash: manifest.config_hash,
        toolkit_version: manifest.toolkit_version,
        files,
    };
    let text = serde_json::to_string_pretty(&index)?;
    bundle.write(&bundle.path(INDEX_FILE), text.as_bytes())?;
    eprintln!(
        "report: {} files, complete = {}",
        index.files.len(),
        index.complete
    );
    Ok(index)
}

//! Run directory layout and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cattr_core::container::write_atomic;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, IoContext, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";

/// Pipeline stages in dependency order, with the file each one leaves
/// behind as proof of completion.
pub const STAGES: [(&str, &str); 6] = [
    ("gen-data", "data/base_train.ds"),
    ("train-ensemble", "models/member_000.ckpt"),
    ("probe-sweep", "reports/layer_sweep.csv"),
    ("sparsity-sweep", "reports/sparsity_sweep.csv"),
    ("attribute", "reports/attribution_index.csv"),
    ("leaveout", "reports/leaveout.csv"),
];

#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn base(&self, split: &str) -> PathBuf {
        self.path(&format!("data/base_{split}.ds"))
    }

    pub fn concept(&self, name: &str, split: &str) -> PathBuf {
        self.path(&format!("data/concepts/{name}_{split}.ds"))
    }

    pub fn member(&self, j: usize) -> PathBuf {
        self.path(&format!("models/member_{j:03}.ckpt"))
    }

    pub fn leaveout_member(&self, t: usize, j: usize) -> PathBuf {
        self.path(&format!("models/leaveout_t{t:05}/member_{j:03}.ckpt"))
    }

    pub fn probe(&self, concept: &str, tap: &str, j: usize, k: Option<usize>) -> PathBuf {
        let suffix = k.map(|k| format!("_k{k}")).unwrap_or_default();
        self.path(&format!("probes/{concept}/{tap}/member_{j:03}{suffix}.probe"))
    }

    pub fn attribution(&self, concept: &str, tap: &str) -> PathBuf {
        self.path(&format!("attribution/{concept}_{tap}.attr"))
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.path(&format!("reports/{name}"))
    }

    pub fn cache(&self) -> PathBuf {
        self.path("cache")
    }

    /// Fails with the stage that produces `path` when it does not exist.
    pub fn require(&self, path: PathBuf, stage: &'static str) -> Result<PathBuf> {
        if path.exists() {
            Ok(path)
        } else {
            Err(HarnessError::MissingInput { stage, path })
        }
    }

    pub fn write(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).at(dir)?;
        }
        write_atomic(path, bytes)?;
        Ok(())
    }

    pub fn relative(&self, path: &Path) -> String {
        path.strip_prefix(&self.root)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).at(path)?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub seconds: f64,
    pub threads: usize,
    /// Relative path → SHA-256 of every file the stage wrote.
    pub artifacts: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub toolkit_version: String,
    pub rng_algorithm: String,
    pub stages: BTreeMap<String, StageRecord>,
}

impl RunManifest {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            rng_algorithm: cattr_core::rng::RNG_ALGORITHM.to_string(),
            stages: BTreeMap::new(),
        }
    }

    /// Every artifact across stages; later stages win on a shared path.
    pub fn artifacts(&self) -> BTreeMap<String, String> {
        let mut all = BTreeMap::new();
        for (name, _) in STAGES {
            if let Some(rec) = self.stages.get(name) {
                all.extend(rec.artifacts.clone());
            }
        }
        all
    }
}

/// Opens the run directory for `cfg`: writes `config.json` on first use and
/// rejects a directory that already holds a different configuration.
pub fn open_run(run: &RunDir, cfg: &ExperimentConfig) -> Result<RunManifest> {
    std::fs::create_dir_all(run.root()).at(run.root())?;
    let manifest_path = run.path(MANIFEST_FILE);
    if manifest_path.exists() {
        let text = std::fs::read_to_string(&manifest_path).at(&manifest_path)?;
        let m: RunManifest = serde_json::from_str(&text)?;
        if m.config_hash != cfg.hash() {
            return Err(HarnessError::Config(format!(
                "{} was produced by a different configuration (hash {}); use a fresh --out",
                run.root().display(),
                m.config_hash
            )));
        }
        return Ok(m);
    }
    let m = RunManifest::new(cfg);
    run.write(&run.path(CONFIG_FILE), cfg.to_json().as_bytes())?;
    save_manifest(run, &m)?;
    Ok(m)
}

pub fn save_manifest(run: &RunDir, m: &RunManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(m)?;
    run.write(&run.path(MANIFEST_FILE), text.as_bytes())
}

pub fn load_manifest(run: &RunDir) -> Result<RunManifest> {
    let path = run.require(run.path(MANIFEST_FILE), "gen-data")?;
    let text = std::fs::read_to_string(&path).at(&path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Collects the files a stage writes and records them, with their digests
/// and the wall-clock time, in the manifest.
pub struct StageLog<'a> {
    run: &'a RunDir,
    name: &'static str,
    started: std::time::Instant,
    files: Vec<PathBuf>,
}

impl<'a> StageLog<'a> {
    pub fn start(run: &'a RunDir, name: &'static str) -> Self {
        Self {
            run,
            name,
            started: std::time::Instant::now(),
            files: Vec::new(),
        }
    }

    pub fn wrote(&mut self, path: impl Into<PathBuf>) {
        self.files.push(path.into());
    }

    pub fn wrote_all(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        self.files.extend(paths);
    }

    pub fn run(&self) -> &RunDir {
        self.run
    }

    pub fn finish(self, threads: usize) -> Result<()> {
        let mut m = load_manifest(self.run)?;
        let mut artifacts = BTreeMap::new();
        for f in &self.files {
            artifacts.insert(self.run.relative(f), file_digest(f)?);
        }
        m.stages.insert(
            self.name.to_string(),
            StageRecord {
                seconds: self.started.elapsed().as_secs_f64(),
                threads,
                artifacts,
            },
        );
        save_manifest(self.run, &m)
    }
}

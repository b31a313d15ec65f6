//! Pipeline stages. Each stage reads its inputs from the run directory,
//! fans work out over the context's thread pool, and joins results in a
//! fixed order so reports do not depend on the thread count.

mod attribute;
mod data;
mod ensemble;
mod leaveout;
mod oracle;
mod report;
mod sweeps;

use std::path::PathBuf;

use cattr_core::datagen::{load_concept_dataset, load_image_dataset};
use cattr_core::nn::load_network;
use cattr_core::probes::ActivationCache;
use cattr_core::{ConceptDataset, ImageDataset, Network, Tensor};

pub use attribute::attribute;
pub use data::gen_data;
pub use ensemble::train_ensemble;
pub use leaveout::leaveout;
pub use oracle::oracle_check;
pub use report::{emit_reports, BundleIndex, BUNDLE_DIR};
pub use sweeps::{probe_sweep, sparsity_sweep};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::run::{open_run, RunDir};

/// Members whose spread is reported as the std band of the layer sweep.
pub const BAND_MEMBERS: usize = 5;

pub struct Context {
    pub cfg: ExperimentConfig,
    pub run: RunDir,
    pub threads: usize,
    pool: rayon::ThreadPool,
}

impl Context {
    /// Validates `cfg` and opens (or creates) the run directory.
    pub fn new(cfg: ExperimentConfig, out: impl Into<PathBuf>, threads: usize) -> Result<Self> {
        cfg.validate()?;
        let threads = threads.max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
        let run = RunDir::new(out);
        open_run(&run, &cfg)?;
        Ok(Self {
            cfg,
            run,
            threads,
            pool,
        })
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    pub(crate) fn cache(&self) -> ActivationCache {
        ActivationCache::new(self.run.cache())
    }

    pub(crate) fn load_base(&self) -> Result<(ImageDataset, ImageDataset)> {
        let tr = self.run.require(self.run.base("train"), "gen-data")?;
        let va = self.run.require(self.run.base("val"), "gen-data")?;
        Ok((load_image_dataset(&tr)?, load_image_dataset(&va)?))
    }

    pub(crate) fn load_concept(&self, name: &str) -> Result<(ConceptDataset, ConceptDataset)> {
        let tr = self.run.require(self.run.concept(name, "train"), "gen-data")?;
        let va = self.run.require(self.run.concept(name, "val"), "gen-data")?;
        Ok((load_concept_dataset(&tr)?, load_concept_dataset(&va)?))
    }

    pub(crate) fn load_members(&self) -> Result<Vec<Network>> {
        (0..self.cfg.members)
            .map(|j| {
                let path = self.run.require(self.run.member(j), "train-ensemble")?;
                load_network(&path).map_err(HarnessError::member(j))
            })
            .collect()
    }
}

/// Activations of a concept split at `tap`, through the on-disk cache.
pub(crate) fn concept_acts(
    cache: &ActivationCache,
    net: &Network,
    ds: &ConceptDataset,
    digest: &str,
    tap: &str,
) -> cattr_core::Result<Tensor> {
    cache.get_or_compute(net, &ds.images, digest, tap)
}

pub(crate) fn member_columns(m: usize) -> Vec<String> {
    (0..m).map(|j| format!("member_{j:03}")).collect()
}

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::probe::{Probe, ProbeConfig};
use crate::container::{self, PROBE_MAGIC};
use crate::error::Result;
use crate::nn::EpochRecord;
use crate::scalar::Scalar;

#[derive(Debug, Serialize, Deserialize)]
struct ProbeManifest {
    tap: String,
    dim: usize,
    k: Option<usize>,
    seed: u64,
    hyperparameters: ProbeConfig,
    #[serde(default)]
    train_log: Vec<EpochRecord>,
}

/// Payload: `dim` weights followed by the bias.
pub fn encode_probe<T: Scalar>(probe: &Probe<T>) -> Result<Vec<u8>> {
    let m = ProbeManifest {
        tap: probe.tap.clone(),
        dim: probe.dim(),
        k: probe.sparsity,
        seed: probe.seed(),
        hyperparameters: probe.config.clone(),
        train_log: probe.train_log.clone(),
    };
    let mut payload: Vec<f64> = probe.weights.iter().map(|w| w.as_f64()).collect();
    payload.push(probe.bias.as_f64());
    container::encode(PROBE_MAGIC, &m, &payload)
}

pub fn decode_probe<T: Scalar>(bytes: &[u8]) -> Result<Probe<T>> {
    let (m, mut payload): (ProbeManifest, _) = container::decode(PROBE_MAGIC, bytes, |m: &ProbeManifest| m.dim + 1)?;
    let bias = T::lit(payload.pop().unwrap_or_default());
    Ok(Probe {
        tap: m.tap,
        weights: payload.into_iter().map(T::lit).collect(),
        bias,
        sparsity: m.k,
        config: m.hyperparameters,
        train_log: m.train_log,
    })
}

pub fn save_probe<T: Scalar>(probe: &Probe<T>, path: &Path) -> Result<()> {
    container::write_atomic(path, &encode_probe(probe)?)
}

pub fn load_probe<T: Scalar>(path: &Path) -> Result<Probe<T>> {
    decode_probe(&std::fs::read(path)?)
}

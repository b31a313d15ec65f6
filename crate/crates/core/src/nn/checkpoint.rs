use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{EpochRecord, Network};
use super::spec::{NetworkSpec, ParamEntry};
use crate::container::{self, CHECKPOINT_MAGIC};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointManifest {
    spec: NetworkSpec,
    seed: u64,
    layout: Vec<ParamEntry>,
    #[serde(default)]
    train_log: Vec<EpochRecord>,
}

pub fn encode_network<T: Scalar>(net: &Network<T>) -> Result<Vec<u8>> {
    let manifest = CheckpointManifest {
        spec: net.spec().clone(),
        seed: net.seed(),
        layout: net.layout().to_vec(),
        train_log: net.train_log.clone(),
    };
    let payload: Vec<f64> = net.params().iter().map(|p| p.as_f64()).collect();
    container::encode(CHECKPOINT_MAGIC, &manifest, &payload)
}

pub fn decode_network<T: Scalar>(bytes: &[u8]) -> Result<Network<T>> {
    let (m, payload): (CheckpointManifest, _) =
        container::decode(CHECKPOINT_MAGIC, bytes, |m: &CheckpointManifest| {
            m.layout.last().map_or(0, |e| e.offset + e.len())
        })?;
    if m.layout != m.spec.layout() {
        return Err(Error::Format {
            offset: 12,
            reason: "layout map disagrees with network spec".into(),
        });
    }
    let mut net = Network::from_params(m.spec, payload.into_iter().map(T::lit).collect(), m.seed)?;
    net.train_log = m.train_log;
    Ok(net)
}

pub fn save_network<T: Scalar>(net: &Network<T>, path: &Path) -> Result<()> {
    container::write_atomic(path, &encode_network(net)?)
}

pub fn load_network<T: Scalar>(path: &Path) -> Result<Network<T>> {
    decode_network(&std::fs::read(path)?)
}

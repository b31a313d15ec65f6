use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::container::{self, ACTIVATION_MAGIC};
use crate::error::Result;
use crate::nn::Network;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Row `r` is the flattened tap output for image `r`.
pub fn extract_activations<T: Scalar>(net: &Network<T>, images: &Tensor<T>, tap: &str) -> Result<Tensor<T>> {
    net.forward_to_layer(images, tap)
}

/// SHA-256 of a network's spec and parameters.
pub fn network_digest<T: Scalar>(net: &Network<T>) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(net.spec()).unwrap_or_default());
    h.update(net.seed().to_le_bytes());
    for p in net.params() {
        h.update(p.as_f64().to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CacheKey {
    net_seed: u64,
    net_digest: String,
    tap: String,
    dataset_digest: String,
    shape: Vec<usize>,
}

/// On-disk activation cache keyed by network, tap and dataset digest.
///
/// Entries are written atomically (temp file + rename), so concurrent
/// readers never see a partial file; an entry whose stored key disagrees
/// with the request is recomputed and replaced.
#[derive(Debug, Clone)]
pub struct ActivationCache {
    dir: PathBuf,
}

impl ActivationCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn key<T: Scalar>(net: &Network<T>, tap: &str, dataset_digest: &str, n: usize) -> Result<CacheKey> {
        Ok(CacheKey {
            net_seed: net.seed(),
            net_digest: network_digest(net),
            tap: tap.to_string(),
            dataset_digest: dataset_digest.to_string(),
            shape: vec![n, net.spec().tap_dim(tap)?],
        })
    }

    pub fn path_for<T: Scalar>(&self, net: &Network<T>, tap: &str, dataset_digest: &str) -> PathBuf {
        let mut h = Sha256::new();
        h.update(net.seed().to_le_bytes());
        h.update(network_digest(net).as_bytes());
        h.update(tap.as_bytes());
        h.update(dataset_digest.as_bytes());
        let name = hex::encode(&h.finalize()[..12]);
        self.dir.join(format!("{name}.acts"))
    }

    /// Cached activations, recomputing on a miss or any key mismatch.
    pub fn get_or_compute<T: Scalar>(
        &self,
        net: &Network<T>,
        images: &Tensor<T>,
        dataset_digest: &str,
        tap: &str,
    ) -> Result<Tensor<T>> {
        let key = Self::key(net, tap, dataset_digest, images.rows())?;
        let path = self.path_for(net, tap, dataset_digest);
        if let Ok(bytes) = std::fs::read(&path) {
            let hit = container::decode(ACTIVATION_MAGIC, &bytes, |k: &CacheKey| k.shape.iter().product());
            if let Ok((stored, data)) = hit {
                if stored == key {
                    return Tensor::new(key.shape, data.into_iter().map(T::lit).collect());
                }
            }
        }
        let acts = extract_activations(net, images, tap)?;
        let payload: Vec<f64> = acts.data().iter().map(|v| v.as_f64()).collect();
        container::save(&path, ACTIVATION_MAGIC, &key, &payload)?;
        Ok(acts)
    }
}

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::trak::{AttributionMatrix, Provenance};
use crate::container::{self, ATTRIBUTION_MAGIC};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Serialize, Deserialize)]
struct AttributionManifest {
    n_val: usize,
    n_train: usize,
    members: usize,
    val_ids: Vec<u64>,
    train_ids: Vec<u64>,
    provenance: Provenance,
}

/// Row-major scores, one row per validation example.
pub fn encode_attribution<T: Scalar>(am: &AttributionMatrix<T>) -> Result<Vec<u8>> {
    let m = AttributionManifest {
        n_val: am.scores.rows(),
        n_train: am.scores.row_len(),
        members: am.members,
        val_ids: am.val_ids.clone(),
        train_ids: am.train_ids.clone(),
        provenance: am.provenance.clone(),
    };
    let payload: Vec<f64> = am.scores.data().iter().map(|v| v.as_f64()).collect();
    container::encode(ATTRIBUTION_MAGIC, &m, &payload)
}

pub fn decode_attribution<T: Scalar>(bytes: &[u8]) -> Result<AttributionMatrix<T>> {
    let (m, payload): (AttributionManifest, _) =
        container::decode(ATTRIBUTION_MAGIC, bytes, |m: &AttributionManifest| m.n_val * m.n_train)?;
    crate::error::check_dim("attribution val ids", 0, m.n_val, m.val_ids.len())?;
    crate::error::check_dim("attribution train ids", 0, m.n_train, m.train_ids.len())?;
    Ok(AttributionMatrix {
        scores: Tensor::new(vec![m.n_val, m.n_train], payload.into_iter().map(T::lit).collect())?,
        members: m.members,
        val_ids: m.val_ids,
        train_ids: m.train_ids,
        provenance: m.provenance,
    })
}

pub fn save_attribution<T: Scalar>(am: &AttributionMatrix<T>, path: &Path) -> Result<()> {
    container::write_atomic(path, &encode_attribution(am)?)
}

pub fn load_attribution<T: Scalar>(path: &Path) -> Result<AttributionMatrix<T>> {
    decode_attribution(&std::fs::read(path)?)
}

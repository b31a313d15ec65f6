//! Procedural datasets with ground-truth generative factors: the base
//! shape × texture classification set and the binary concept sets probes are
//! trained on.

mod base;
mod concepts;
pub mod draw;
mod io;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use base::{generate_base_dataset, BaseConfig};
pub use concepts::{
    build_texture_concept, generate_boundary_concept, generate_highlow_concept, relative_split,
    FrequencyConfig, BOUNDARY, HIGHLOW, RELATIVE_ID_OFFSET,
};
pub use draw::{is_uniform_frequency, mean_abs_laplacian, Boundary, HighFreq, LowFreq, ShapeKind, TextureKind};
pub use io::{
    decode_concept_dataset, decode_image_dataset, encode_concept_dataset, encode_image_dataset,
    load_concept_dataset, load_image_dataset, save_concept_dataset, save_image_dataset, to_pgm,
    write_pgm,
};

use crate::attribution::{top_ids, ConceptAttribution};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrequencyLayout {
    /// High-frequency region on one side of an oriented boundary, smooth on
    /// the other.
    Transition,
    UniformHigh,
    UniformLow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Band {
    Low,
    High,
    /// Constant image, no spatial variation at all.
    Flat,
}

/// Pixels, class labels, ids and metadata accumulated for one split.
pub(crate) type SplitParts<T> = (Vec<T>, Vec<usize>, Vec<u64>, Vec<GeneratorMeta>);

/// Generative factors recorded for every synthetic example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum GeneratorMeta {
    Base {
        shape: ShapeKind,
        texture: TextureKind,
        center: [f64; 2],
        radius: f64,
        rotation: f64,
    },
    HighLow {
        layout: FrequencyLayout,
        boundary: Option<Boundary>,
        /// Side of `boundary` (sign of [`Boundary::side`]) holding the
        /// high-frequency region.
        high_side_positive: bool,
    },
    Boundary {
        boundary: Option<Boundary>,
        band: Band,
        /// Luminance difference between the two sides (0 for negatives).
        step: f64,
    },
}

impl GeneratorMeta {
    pub fn texture(&self) -> Option<TextureKind> {
        match self {
            GeneratorMeta::Base { texture, .. } => Some(*texture),
            _ => None,
        }
    }

    pub fn boundary(&self) -> Option<&Boundary> {
        match self {
            GeneratorMeta::HighLow { boundary, .. } | GeneratorMeta::Boundary { boundary, .. } => {
                boundary.as_ref()
            }
            GeneratorMeta::Base { .. } => None,
        }
    }
}

/// Labelled images with stable ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDataset<T> {
    /// `n × C × H × W`, values in `[0, 1]`.
    pub images: Tensor<T>,
    pub class_labels: Vec<usize>,
    pub ids: Vec<u64>,
    pub n_classes: usize,
    /// Present for synthetic data, `None` for ingested images.
    pub metadata: Option<Vec<GeneratorMeta>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

/// Binary concept set: positives plus an equal number of negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptDataset<T> {
    pub concept: String,
    pub split: Split,
    pub images: Tensor<T>,
    /// 1 for concept examples, 0 otherwise.
    pub labels: Vec<usize>,
    /// Ids into the originating image dataset or generator.
    pub source_ids: Vec<u64>,
    pub metadata: Option<Vec<GeneratorMeta>>,
}

fn validate_images<T: Scalar>(images: &Tensor<T>, n: usize) -> Result<()> {
    if images.shape().len() != 4 {
        return Err(Error::InvalidConfig(format!(
            "images must be n × C × H × W, got {:?}",
            images.shape()
        )));
    }
    crate::error::check_dim("images", 0, n, images.rows())?;
    if images.data().iter().any(|v| !(v.is_finite() && *v >= T::zero() && *v <= T::one())) {
        return Err(Error::InvalidConfig("image values must be finite and in [0, 1]".into()));
    }
    Ok(())
}

fn digest_of<T: Scalar>(tag: &str, images: &Tensor<T>, labels: &[usize], ids: &[u64]) -> String {
    let mut h = Sha256::new();
    h.update(tag.as_bytes());
    for d in images.shape() {
        h.update((*d as u64).to_le_bytes());
    }
    for v in images.data() {
        h.update(v.as_f64().to_le_bytes());
    }
    for l in labels {
        h.update((*l as u64).to_le_bytes());
    }
    for i in ids {
        h.update(i.to_le_bytes());
    }
    hex::encode(h.finalize())
}

impl<T: Scalar> ImageDataset<T> {
    pub fn new(
        images: Tensor<T>,
        class_labels: Vec<usize>,
        ids: Vec<u64>,
        n_classes: usize,
        metadata: Option<Vec<GeneratorMeta>>,
    ) -> Result<Self> {
        let n = class_labels.len();
        validate_images(&images, n)?;
        crate::error::check_dim("ids", 0, n, ids.len())?;
        if let Some(m) = &metadata {
            crate::error::check_dim("metadata", 0, n, m.len())?;
        }
        if let Some(bad) = class_labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidConfig(format!("class label {bad} ≥ n_classes {n_classes}")));
        }
        let mut seen = std::collections::HashSet::with_capacity(n);
        if let Some(dup) = ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::InvalidConfig(format!("duplicate id {dup}")));
        }
        Ok(Self {
            images,
            class_labels,
            ids,
            n_classes,
            metadata,
        })
    }

    /// Ingested data without generative metadata; ids are `0..n`.
    pub fn from_external(images: Tensor<T>, class_labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let ids = (0..class_labels.len() as u64).collect();
        Self::new(images, class_labels, ids, n_classes, None)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Keeps rows `idx` in the given order.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            images: self.images.select_rows(idx),
            class_labels: idx.iter().map(|&i| self.class_labels[i]).collect(),
            ids: idx.iter().map(|&i| self.ids[i]).collect(),
            n_classes: self.n_classes,
            metadata: self
                .metadata
                .as_ref()
                .map(|m| idx.iter().map(|&i| m[i].clone()).collect()),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &l in &self.class_labels {
            c[l] += 1;
        }
        c
    }

    /// SHA-256 over images, labels and ids.
    pub fn content_digest(&self) -> String {
        digest_of("image-dataset", &self.images, &self.class_labels, &self.ids)
    }
}

impl<T: Scalar> ConceptDataset<T> {
    pub fn new(
        concept: impl Into<String>,
        split: Split,
        images: Tensor<T>,
        labels: Vec<usize>,
        source_ids: Vec<u64>,
        metadata: Option<Vec<GeneratorMeta>>,
    ) -> Result<Self> {
        let n = labels.len();
        validate_images(&images, n)?;
        crate::error::check_dim("source ids", 0, n, source_ids.len())?;
        if let Some(m) = &metadata {
            crate::error::check_dim("metadata", 0, n, m.len())?;
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidConfig("concept labels must be 0 or 1".into()));
        }
        let pos = labels.iter().filter(|&&l| l == 1).count();
        if 2 * pos != n {
            return Err(Error::InvalidConfig(format!(
                "concept set must be balanced, got {pos} positives of {n}"
            )));
        }
        Ok(Self {
            concept: concept.into(),
            split,
            images,
            labels,
            source_ids,
            metadata,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn content_digest(&self) -> String {
        digest_of(&format!("concept:{}", self.concept), &self.images, &self.labels, &self.source_ids)
    }
}

/// The dataset without the `t` ids ranked highest by `ranking` (ties to the
/// lower id); the remaining examples keep their order.
pub fn remove_top_t<T: Scalar, S: Scalar>(
    dataset: &ImageDataset<T>,
    ranking: &ConceptAttribution<S>,
    t: usize,
) -> Result<ImageDataset<T>> {
    let n = dataset.len();
    if t >= n {
        return Err(Error::InvalidConfig(format!("cannot remove {t} of {n} examples")));
    }
    let index: std::collections::HashMap<u64, usize> =
        ranking.ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut scores = Vec::with_capacity(n);
    for id in &dataset.ids {
        match index.get(id) {
            Some(&i) => scores.push(ranking.tau_c[i]),
            None => return Err(Error::InvalidConfig(format!("ranking has no score for id {id}"))),
        }
    }
    let removed: std::collections::HashSet<u64> = top_ids(&dataset.ids, &scores, t).into_iter().collect();
    let keep: Vec<usize> = (0..n).filter(|&i| !removed.contains(&dataset.ids[i])).collect();
    Ok(dataset.select(&keep))
}

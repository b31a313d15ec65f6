use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ConceptDataset, GeneratorMeta, ImageDataset, Split};
use crate::container::{self, DATASET_MAGIC};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum DatasetManifest {
    Image {
        shape: Vec<usize>,
        n_classes: usize,
        class_labels: Vec<usize>,
        ids: Vec<u64>,
        metadata: Option<Vec<GeneratorMeta>>,
    },
    Concept {
        concept: String,
        split: Split,
        shape: Vec<usize>,
        labels: Vec<usize>,
        source_ids: Vec<u64>,
        metadata: Option<Vec<GeneratorMeta>>,
    },
}

impl DatasetManifest {
    fn payload_len(&self) -> usize {
        match self {
            DatasetManifest::Image { shape, .. } | DatasetManifest::Concept { shape, .. } => {
                shape.iter().product()
            }
        }
    }
}

fn widen<T: Scalar>(t: &Tensor<T>) -> Vec<f64> {
    t.data().iter().map(|v| v.as_f64()).collect()
}

fn narrow<T: Scalar>(shape: Vec<usize>, data: Vec<f64>) -> Result<Tensor<T>> {
    Tensor::new(shape, data.into_iter().map(T::lit).collect())
}

pub fn encode_image_dataset<T: Scalar>(ds: &ImageDataset<T>) -> Result<Vec<u8>> {
    let m = DatasetManifest::Image {
        shape: ds.images.shape().to_vec(),
        n_classes: ds.n_classes,
        class_labels: ds.class_labels.clone(),
        ids: ds.ids.clone(),
        metadata: ds.metadata.clone(),
    };
    container::encode(DATASET_MAGIC, &m, &widen(&ds.images))
}

pub fn decode_image_dataset<T: Scalar>(bytes: &[u8]) -> Result<ImageDataset<T>> {
    let (m, data) = container::decode(DATASET_MAGIC, bytes, DatasetManifest::payload_len)?;
    match m {
        DatasetManifest::Image {
            shape,
            n_classes,
            class_labels,
            ids,
            metadata,
        } => ImageDataset::new(narrow(shape, data)?, class_labels, ids, n_classes, metadata),
        DatasetManifest::Concept { .. } => Err(Error::Format {
            offset: 12,
            reason: "file holds a concept dataset, expected an image dataset".into(),
        }),
    }
}

pub fn encode_concept_dataset<T: Scalar>(ds: &ConceptDataset<T>) -> Result<Vec<u8>> {
    let m = DatasetManifest::Concept {
        concept: ds.concept.clone(),
        split: ds.split,
        shape: ds.images.shape().to_vec(),
        labels: ds.labels.clone(),
        source_ids: ds.source_ids.clone(),
        metadata: ds.metadata.clone(),
    };
    container::encode(DATASET_MAGIC, &m, &widen(&ds.images))
}

pub fn decode_concept_dataset<T: Scalar>(bytes: &[u8]) -> Result<ConceptDataset<T>> {
    let (m, data) = container::decode(DATASET_MAGIC, bytes, DatasetManifest::payload_len)?;
    match m {
        DatasetManifest::Concept {
            concept,
            split,
            shape,
            labels,
            source_ids,
            metadata,
        } => ConceptDataset::new(concept, split, narrow(shape, data)?, labels, source_ids, metadata),
        DatasetManifest::Image { .. } => Err(Error::Format {
            offset: 12,
            reason: "file holds an image dataset, expected a concept dataset".into(),
        }),
    }
}

pub fn save_image_dataset<T: Scalar>(ds: &ImageDataset<T>, path: &Path) -> Result<()> {
    container::write_atomic(path, &encode_image_dataset(ds)?)
}

pub fn load_image_dataset<T: Scalar>(path: &Path) -> Result<ImageDataset<T>> {
    decode_image_dataset(&std::fs::read(path)?)
}

pub fn save_concept_dataset<T: Scalar>(ds: &ConceptDataset<T>, path: &Path) -> Result<()> {
    container::write_atomic(path, &encode_concept_dataset(ds)?)
}

pub fn load_concept_dataset<T: Scalar>(path: &Path) -> Result<ConceptDataset<T>> {
    decode_concept_dataset(&std::fs::read(path)?)
}

/// Binary PGM (P5), 8-bit, `round(255 · v)`; channels are averaged.
pub fn to_pgm<T: Scalar>(image: &[T], channels: usize, height: usize, width: usize) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    let plane = height * width;
    for p in 0..plane {
        let v: f64 = (0..channels).map(|c| image[c * plane + p].as_f64()).sum::<f64>() / channels as f64;
        out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
    }
    out
}

pub fn write_pgm<T: Scalar>(path: &Path, image: &[T], channels: usize, height: usize, width: usize) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&to_pgm(image, channels, height, width))?;
    Ok(())
}

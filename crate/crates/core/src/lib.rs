//! Concept probing and ensemble data attribution for small image classifiers.
//!
//! The numeric core is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below fix the `f64` instantiation the pipeline and all persisted
//! artifacts use.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attribution;
pub mod container;
pub mod datagen;
pub mod error;
pub mod linalg;
pub mod nn;
pub mod probes;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor = tensor::Tensor<f64>;
pub type Network = nn::Network<f64>;
pub type Probe = probes::Probe<f64>;
pub type ImageDataset = datagen::ImageDataset<f64>;
pub type ConceptDataset = datagen::ConceptDataset<f64>;
pub type AttributionMatrix = attribution::AttributionMatrix<f64>;
pub type ConceptAttribution = attribution::ConceptAttribution<f64>;

pub type TensorF32 = tensor::Tensor<f32>;
pub type NetworkF32 = nn::Network<f32>;
pub type ProbeF32 = probes::Probe<f32>;

//! Affine concept probes on frozen layer activations: dense and
//! hard-thresholded sparse training, the subnetwork + probe composition,
//! pseudo-labelling, and the rotation-invariance check on probe logits.

mod activations;
mod composed;
mod io;
mod probe;
mod rotation;

pub use activations::{extract_activations, network_digest, ActivationCache};
pub use composed::{assign_concept_labels, ComposedModel, ParamSet};
pub use io::{decode_probe, encode_probe, load_probe, save_probe};
pub use probe::{
    probe_accuracy, probe_logits, probe_predictions, top_k_magnitude, train_probe, train_sparse_probe, Probe,
    ProbeConfig,
};
pub use rotation::{rotation_invariance_check, ORTHOGONALITY_TOL};

//! Small convolutional classifiers with named taps, manual backpropagation,
//! and deterministic Adam training.

mod checkpoint;
mod layers;
mod model;
mod network;
mod spec;
mod train;

pub use checkpoint::{decode_network, encode_network, load_network, save_network};
pub use model::{loss_and_grad, per_example_grads, Loss, Model};
pub use network::{EpochRecord, Network};
pub use spec::{BlockSpec, NetworkSpec, ParamEntry, LOGITS_TAP};
pub use train::{evaluate_accuracy, train_network, Adam, TrainConfig};

pub(crate) use network::Trace;

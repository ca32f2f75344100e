//! Minimal trainable CNN: layers, losses, momentum SGD, checkpoints and
//! finite-difference gradient checks.

pub mod checkpoint;
pub mod gradcheck;
mod layer;
pub mod loss;
mod network;
pub mod optim;
mod tensor;
pub mod train;

pub use layer::{Layer, LayerSpec};
pub use loss::{LossKind, Target};
pub use network::{ForwardCache, Gradients, Mode, Network};
pub use optim::{sgd_step, Sgd};
pub use tensor::{Shape, Tensor};
pub use train::{evaluate, train, Dataset, EpochMetrics, LrSchedule, Metric, Normalizer, Sample, TrainConfig};

pub use network::mix64;

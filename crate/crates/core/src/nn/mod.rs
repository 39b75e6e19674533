//! Small regression networks with hand-written backpropagation.
//!
//! Parameters live in one flat `f64` vector. Dense weights are `out x in`
//! row-major; convolution weights are `out x (kernel * in_channels)` so each
//! output channel is a dot product with a contiguous window of input frames.

pub mod adam;
pub mod artifact;
pub mod init;
pub mod model;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use artifact::ModelArtifact;
pub use init::{xavier_limit, xavier_uniform};
pub use model::{Architecture, ConvPoolConfig, Example, FfnnConfig, Input, Model, PaddedBatch};
pub use train::{best_epoch, train, EpochRecord, TrainConfig, TrainOutcome};

//! Dense-tensor convolutional networks for Mel-spectrogram cubes.
//!
//! Activations are channels-last (`[batch, band, frame, depth, channel]`).
//! Each block runs convolution, max pooling, batch normalisation and ReLU;
//! the head applies dropout, global average pooling and a dense stack
//! ending in a two-way softmax (index 1 = leak).

mod checkpoint;
pub mod layers;
mod model;
mod spec;
mod tensor;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_EXT, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use layers::{batchnorm, conv3d, dropout, maxpool3d, softmax_rows, Mode};
pub use model::{parameter_layout, LossGrads, Model, Param, ParamKind, Score};
pub use spec::{ArchitectureSpec, BlockShape, ConvBlock, Variant, DEFAULT_DROPOUT};
pub use tensor::Tensor;
pub use train::{evaluate, train, train_with, validation_split, Adam, EpochRecord, History, TrainConfig};

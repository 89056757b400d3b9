//! Fiber-optic distributed acoustic sensing (DAS) leak detection for water pipes.
//!
//! The pipeline runs from a synthetic testbed ([`sim`]) through Mel-spectrogram
//! cubes ([`features`]) and a 2D/3D convolutional classifier ([`nn`]) to
//! time-position probability maps and leak localisation ([`detect`]), and
//! finally to leak-size estimation from the affected range ([`quantify`]).

pub mod config;
pub mod detect;
pub mod error;
pub mod fsio;
pub mod hydraulics;
pub mod nn;
pub mod pipeline;
pub mod quantify;
mod rng;
pub mod scalar;
pub mod features;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Model32 = nn::Model<f32>;
pub type Model64 = nn::Model<f64>;
pub type Cube32 = features::FeatureCube<f32>;
pub type Cube64 = features::FeatureCube<f64>;
pub type Extractor32 = features::MelExtractor<f32>;
pub type Extractor64 = features::MelExtractor<f64>;

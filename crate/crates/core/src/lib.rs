//! Adversarial attack detection, attack-group classification and
//! similarity-driven model selection for multivariate time-series
//! classification.
//!
//! The numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

pub mod attacks;
pub mod dataset;
pub mod detection;
pub mod error;
pub mod group;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod similarity;
pub mod transform;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Sample = dataset::Sample<f64>;
pub type Dataset = dataset::Dataset<f64>;
pub type TrainedModel = models::TrainedModel<f64>;
pub type DetectorPair = detection::DetectorPair<f64>;
pub type EmbeddingEncoder = similarity::EmbeddingEncoder<f64>;
pub type Pbd = pipeline::Pbd<f64>;
pub type PbdDataset = pipeline::PbdDataset<f64>;
pub type Arrival = pipeline::Arrival<f64>;

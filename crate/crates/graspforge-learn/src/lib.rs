//! Minimal reverse-mode automatic differentiation over dense matrices, and
//! the two models built on it: a conditional VAE predicting contact
//! semantic maps from object point clouds, and a three-class grasp
//! evaluator scoring (scene crop, hand cloud) pairs.
//!
//! Training is single-threaded and bit-reproducible given a seed; inference
//! is reentrant. Parameters checkpoint to little-endian f32 blobs.

pub mod checkpoint;
pub mod cvae;
pub mod encoder;
pub mod error;
pub mod evaluator;
pub mod gradcheck;
pub mod mat;
pub mod standardize;
pub mod tape;
pub mod trainer;

pub use error::LearnError;
pub use mat::Mat;
pub use tape::{Tape, VarId};

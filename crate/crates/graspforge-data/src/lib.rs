//! Dataset synthesis and serialization: cluttered-scene grasp records with
//! poses, quality scores, contact maps and point-cloud blobs, plus the
//! human-readable manifest tying a dataset directory together.
//!
//! Directory layout:
//!
//! ```text
//! <dataset>/
//!   manifest.txt             header, config echo, object/scene tables
//!   objects/<name>.obj       the object library (written for portability)
//!   scenes/<id>/records.bin  binary records, one file per scene
//!   scenes/<id>/scene.json   object placements for pipeline consumption
//!   blobs/<hash>.f32         content-addressed float blobs (clouds)
//! ```

pub mod error;
pub mod manifest;
pub mod record;
pub mod synth;

pub use error::DataError;
pub use manifest::Manifest;
pub use record::DatasetRecord;
pub use synth::{synthesize_dataset, synthesize_grasps_single, DatasetConfig};

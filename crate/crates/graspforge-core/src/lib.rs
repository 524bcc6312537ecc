//! Core engine for multi-fingered grasp synthesis: triangle-mesh geometry and
//! spatial queries, a config-driven articulated hand, cluttered-scene
//! construction, hand-object contact maps, analytic grasp quality, and
//! contact-map-driven grasp detection.
//!
//! Everything here is deterministic: sampling operations take explicit seeds
//! (see [`rng::SeedStream`]) and batch entry points preserve input order, so
//! results are identical at any thread count.

pub mod contact;
pub mod detect;
pub mod error;
pub mod geometry;
pub mod grasp_sampling;
pub mod hand;
pub mod parallel;
pub mod quality;
pub mod rng;
pub mod scene;

pub use error::CoreError;

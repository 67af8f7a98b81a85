//! Clothes-changing person re-identification with face-verified gallery
//! enrichment.
//!
//! A track is labeled by fusing two score vectors: whole-body (ReID)
//! similarity against a gallery enriched with confidently face-labeled query
//! crops, and face similarity against a face gallery built from verified
//! labeled faces.

pub mod cluster;
pub mod enrichment;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod scoring;
pub mod synth;

pub use error::{Error, Result};

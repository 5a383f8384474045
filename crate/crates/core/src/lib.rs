//! Homography-centric multi-object tracking for moving cameras.
//!
//! The pipeline estimates inter-frame homographies only at sampled keyframes
//! and derives the rest ([`fhe`]), associates detections with tracks using
//! IoU computed after cross-projecting boxes into each other's frame
//! ([`association`]), and optionally refines ID embeddings with a forward-only
//! homographic slot attention ([`vcil`]). A synthetic moving-camera scene
//! generator ([`simulator`]) provides exact ground truth for verification
//! and [`metrics`] implements CLEAR-MOT and IDF1.

// Range checks are written `!(x > 0.0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod association;
pub mod error;
pub mod exec;
pub mod fhe;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pipeline;
mod seed;
pub mod simulator;
pub mod vcil;

pub use error::{Error, Result};
pub use exec::Execution;
